#include "rgs/analytic_recon.hpp"

#include "rgs/parallel.hpp"
#include "fftw_lock.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace rgs {

std::mutex& detail::fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

namespace {

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

struct PlanDeleter {
    void operator()(fftw_plan p) const {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};
using Plan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Spectrum of the band-limited spatial ramp kernel on a circular grid of n samples.
std::vector<double> ram_lak_response(std::size_t n, double tau) {
    FftwBuffer<double> h(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    FftwBuffer<fftw_complex> spec(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t m = std::min(i, n - i);
        if (m == 0)
            h[i] = 1.0 / (4.0 * tau * tau);
        else if (m % 2 == 1)
            h[i] = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(m * m) * tau * tau);
        else
            h[i] = 0.0;
    }
    Plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), h.get(), spec.get(), FFTW_ESTIMATE));
    }
    fftw_execute(plan.get());
    std::vector<double> out(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) out[k] = tau * spec[k][0];
    out[0] = 0.0;
    return out;
}

}  // namespace

RampFilter::RampFilter(RampKind kind, std::size_t cols, double sample_spacing)
    : kind_(kind), cols_(cols), padded_(next_pow2(2 * cols)) {
    if (cols < 2) throw std::invalid_argument("ramp filter: need at least two columns");
    if (!(sample_spacing > 0.0)) throw std::invalid_argument("ramp filter: spacing must be positive");
    response_ = ram_lak_response(padded_, sample_spacing);
    if (kind_ == RampKind::hann) {
        const double half = static_cast<double>(padded_ / 2);
        for (std::size_t k = 0; k < response_.size(); ++k)
            response_[k] *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(k) / half));
    }
}

void RampFilter::apply(std::vector<double>& row) const {
    if (row.size() != cols_) throw std::invalid_argument("ramp filter: row length mismatch");
    const std::size_t n = padded_;
    FftwBuffer<double> buf(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    FftwBuffer<fftw_complex> spec(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
    Plan fwd, inv;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fwd.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.get(), spec.get(), FFTW_ESTIMATE));
        inv.reset(fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.get(), buf.get(), FFTW_ESTIMATE));
    }
    std::fill(buf.get(), buf.get() + n, 0.0);
    std::copy(row.begin(), row.end(), buf.get());
    fftw_execute(fwd.get());
    for (std::size_t k = 0; k <= n / 2; ++k) {
        spec[k][0] *= response_[k];
        spec[k][1] *= response_[k];
    }
    fftw_execute(inv.get());
    const double norm = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < cols_; ++i) row[i] = buf[i] * norm;
}

double sample_bilinear(const Image2D& image, double u, double v) {
    const double fu = std::floor(u), fv = std::floor(v);
    const auto u0 = static_cast<long>(fu), v0 = static_cast<long>(fv);
    const double au = u - fu, av = v - fv;
    const auto cols = static_cast<long>(image.cols), rows = static_cast<long>(image.rows);
    auto at = [&](long uu, long vv) -> double {
        if (uu < 0 || vv < 0 || uu >= cols || vv >= rows) return 0.0;
        return image.data[static_cast<std::size_t>(vv * cols + uu)];
    };
    return (1.0 - av) * ((1.0 - au) * at(u0, v0) + au * at(u0 + 1, v0)) +
           av * ((1.0 - au) * at(u0, v0 + 1) + au * at(u0 + 1, v0 + 1));
}

namespace {

bool on_detector(const ConeBeamGeometry& g, double u, double v) {
    return u >= -0.5 && v >= -0.5 && u <= static_cast<double>(g.detector_cols) - 0.5 &&
           v <= static_cast<double>(g.detector_rows) - 0.5;
}

// Voxel-driven backprojection: out += sum_view weight(depth) * sample(image_view).
// Returns whether any voxel fell outside the detector.
bool backproject_into(const std::vector<Image2D>& images, const ConeBeamGeometry& geom,
                      const GridSpec& grid, bool distance_weight, double scale, VoxelVolume& out) {
    std::vector<ViewFrame> frames(geom.views());
    for (std::size_t v = 0; v < geom.views(); ++v) frames[v] = view_frame(geom, v);
    const double uc = 0.5 * static_cast<double>(geom.detector_cols - 1);
    const double vc = 0.5 * static_cast<double>(geom.detector_rows - 1);
    std::vector<char> outside(grid.dims[2], 0);

    parallel_for(grid.dims[2], [&](std::size_t k) {
        for (std::size_t view = 0; view < geom.views(); ++view) {
            const ViewFrame& f = frames[view];
            const Image2D& img = images[view];
            for (std::size_t j = 0; j < grid.dims[1]; ++j) {
                for (std::size_t i = 0; i < grid.dims[0]; ++i) {
                    const Vec3 rel = grid.voxel_center(i, j, k) - f.source;
                    const double depth = rel.dot(f.axis);
                    const double mag = geom.sdd / depth;
                    const double u = (rel.dot(f.eu) * mag - geom.detector_offset_u) / geom.pixel_pitch_u + uc;
                    const double v = (rel.dot(f.ev) * mag - geom.detector_offset_v) / geom.pixel_pitch_v + vc;
                    if (!on_detector(geom, u, v)) outside[k] = 1;
                    double w = scale;
                    if (distance_weight) {
                        const double ratio = geom.sad / depth;
                        w *= ratio * ratio;
                    }
                    out.values[grid.index(i, j, k)] += w * sample_bilinear(img, u, v);
                }
            }
        }
    });
    for (char c : outside)
        if (c) return true;
    return false;
}

}  // namespace

ReconResult fdk(const ProjectionStack& stack, const GridSpec& grid, RampKind filter) {
    stack.validate_shape();
    grid.validate();
    const ConeBeamGeometry& geom = stack.geometry;
    if (geom.views() < 2) throw std::invalid_argument("fdk: at least two views required");

    // Virtual detector through the isocenter.
    const double to_iso = geom.sad / geom.sdd;
    const RampFilter ramp(filter, geom.detector_cols, geom.pixel_pitch_u * to_iso);

    std::vector<Image2D> filtered(geom.views());
    parallel_for(geom.views(), [&](std::size_t view) {
        const Image2D& src = stack.views[view];
        Image2D out(src.rows, src.cols);
        std::vector<double> row(src.cols);
        for (std::size_t v = 0; v < src.rows; ++v) {
            const double zeta = detector_v_mm(geom, static_cast<double>(v)) * to_iso;
            for (std::size_t u = 0; u < src.cols; ++u) {
                const double p = detector_u_mm(geom, static_cast<double>(u)) * to_iso;
                row[u] = src(v, u) * geom.sad / std::sqrt(geom.sad * geom.sad + p * p + zeta * zeta);
            }
            ramp.apply(row);
            for (std::size_t u = 0; u < src.cols; ++u) out(v, u) = row[u];
        }
        filtered[view] = std::move(out);
    });

    ReconResult result;
    result.volume = VoxelVolume(grid);
    // Angular step 2π/V times 1/2 for the redundant full rotation.
    const double scale = std::numbers::pi / static_cast<double>(geom.views());
    result.outside_fov = backproject_into(filtered, geom, grid, true, scale, result.volume);
    for (double& x : result.volume.values) x = std::max(x, 0.0);
    return result;
}

VoxelVolume backproject(const ProjectionStack& maps, const GridSpec& grid) {
    maps.validate_shape();
    grid.validate();
    for (std::size_t v = 0; v < maps.views.size(); ++v)
        for (double x : maps.views[v].data)
            if (x < 0.0)
                throw std::invalid_argument("backproject: view " + std::to_string(v) +
                                            " contains a negative value");
    VoxelVolume out(grid);
    backproject_into(maps.views, maps.geometry, grid, false,
                     1.0 / static_cast<double>(maps.geometry.views()), out);
    return out;
}

ProjectionStack saliency_stack(const std::vector<EnergyMap>& maps, const ConeBeamGeometry& geom) {
    if (maps.size() != geom.views())
        throw std::invalid_argument("saliency_stack: one energy map per view required");
    ProjectionStack s;
    s.geometry = geom;
    s.views.reserve(maps.size());
    for (const EnergyMap& m : maps) {
        Image2D up = upsample_nearest2x(m.values);
        if (up.rows != geom.detector_rows || up.cols != geom.detector_cols)
            throw std::invalid_argument("saliency_stack: energy map is not half detector resolution");
        s.views.push_back(std::move(up));
    }
    return s;
}

}  // namespace rgs
