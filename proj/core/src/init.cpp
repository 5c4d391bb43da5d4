#include "rgs/init.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rgs {

void InitConfig::validate() const {
    if (!(k > 0.0 && k <= 1.0)) throw std::invalid_argument("init.k must be in (0, 1]");
    if (!(tau_air >= 0.0 && tau_air < 1.0)) throw std::invalid_argument("init.tau_air must be in [0, 1)");
    if (n_base < 1) throw std::invalid_argument("init.n_base must be >= 1");
    if (n_detail < 1) throw std::invalid_argument("init.n_detail must be >= 1");
    if (!(detail_initial_density >= 0.0)) throw std::invalid_argument("init.detail_initial_density must be >= 0");
    if (!(base_density_scale > 0.0)) throw std::invalid_argument("init.base_density_scale must be > 0");
}

namespace {

// First `count` entries of a seeded partial Fisher-Yates shuffle.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t count,
                                                    std::mt19937_64& rng) {
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(count);
    return pool;
}

Vec3 jittered_center(const GridSpec& grid, std::size_t index, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    const std::size_t i = index % grid.dims[0];
    const std::size_t j = (index / grid.dims[0]) % grid.dims[1];
    const std::size_t k = index / (grid.dims[0] * grid.dims[1]);
    Vec3 c = grid.voxel_center(i, j, k);
    for (int a = 0; a < 3; ++a) c[a] += jitter(rng) * grid.spacing[a];
    return c;
}

void check_non_negative(const VoxelVolume& v, const char* what) {
    for (double x : v.values)
        if (!(x >= 0.0)) throw std::invalid_argument(std::string(what) + " must be non-negative and finite");
}

}  // namespace

BaseInit init_base(const VoxelVolume& v_lf, const InitConfig& cfg) {
    cfg.validate();
    v_lf.grid.validate();
    check_non_negative(v_lf, "init_base: V_LF");

    const double vmax = v_lf.max_value();
    const double threshold = cfg.tau_air * vmax;
    std::vector<std::size_t> candidates;
    for (std::size_t m = 0; m < v_lf.values.size(); ++m)
        if (v_lf.values[m] > threshold) candidates.push_back(m);
    if (candidates.empty())
        throw std::runtime_error("init_base: no voxel exceeds the air threshold");

    std::mt19937_64 rng(cfg.seed);
    const std::vector<std::size_t> chosen = sample_without_replacement(candidates, cfg.n_base, rng);

    BaseInit out;
    out.candidates = candidates.size();
    out.shortfall = cfg.n_base - chosen.size();
    const double candidate_volume = static_cast<double>(candidates.size()) * v_lf.grid.voxel_volume();
    out.base_scale = std::cbrt(candidate_volume / static_cast<double>(chosen.size()));

    out.set.tag = ComponentTag::base;
    out.set.primitives.reserve(chosen.size());
    for (std::size_t m : chosen) {
        GaussianPrimitive p;
        p.center = jittered_center(v_lf.grid, m, rng);
        p.scales = Vec3::Constant(out.base_scale);
        p.density = v_lf.values[m] * cfg.base_density_scale;
        out.set.primitives.push_back(p);
    }
    return out;
}

std::vector<std::size_t> top_fraction_indices(const VoxelVolume& v, double k) {
    const std::size_t m = v.values.size();
    const auto keep = std::min<std::size_t>(
        m, static_cast<std::size_t>(std::ceil(k * static_cast<double>(m) - 1e-9)));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v.values[a] > v.values[b]; });
    order.resize(std::max<std::size_t>(keep, 1));
    std::sort(order.begin(), order.end());
    return order;
}

GaussianSet init_detail(const VoxelVolume& v_sal, const InitConfig& cfg, double base_scale,
                        double reference_density) {
    cfg.validate();
    v_sal.grid.validate();
    check_non_negative(v_sal, "init_detail: V_sal");
    if (!(base_scale > 0.0)) throw std::invalid_argument("init_detail: base scale must be positive");
    if (v_sal.max_value() <= 0.0) throw std::runtime_error("init_detail: saliency volume is all zero");

    const std::vector<std::size_t> candidates = top_fraction_indices(v_sal, cfg.k);
    // Offset the stream so base and detail draws differ under one seed.
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const std::vector<std::size_t> chosen = sample_without_replacement(candidates, cfg.n_detail, rng);

    GaussianSet set;
    set.tag = ComponentTag::detail;
    set.primitives.reserve(chosen.size());
    for (std::size_t m : chosen) {
        GaussianPrimitive p;
        p.center = jittered_center(v_sal.grid, m, rng);
        p.scales = Vec3::Constant(0.5 * base_scale);
        p.density = cfg.detail_initial_density * reference_density;
        set.primitives.push_back(p);
    }
    return set;
}

}  // namespace rgs
