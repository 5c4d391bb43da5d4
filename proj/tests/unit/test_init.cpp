#include "rgs/init.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace rgs;

namespace {

VoxelVolume blob_volume() {
    VoxelVolume v(GridSpec::centered({10, 10, 10}, Vec3::Constant(1.0)));
    for (std::size_t k = 0; k < 10; ++k)
        for (std::size_t j = 0; j < 10; ++j)
            for (std::size_t i = 0; i < 10; ++i) {
                const double r = v.grid.voxel_center(i, j, k).norm();
                v.at(i, j, k) = r < 3.0 ? 1.0 + 0.1 * static_cast<double>(i) : 0.001;
            }
    return v;
}

}  // namespace

TEST(InitBase, PlacesPrimitivesInsideObject) {
    const VoxelVolume v = blob_volume();
    InitConfig cfg;
    cfg.n_base = 40;
    cfg.seed = 3;
    const BaseInit b = init_base(v, cfg);
    ASSERT_EQ(b.set.size(), 40u);
    EXPECT_EQ(b.shortfall, 0u);
    EXPECT_EQ(b.set.tag, ComponentTag::base);
    std::size_t above = 0;
    for (double x : v.values) above += x > cfg.tau_air * v.max_value();
    EXPECT_EQ(b.candidates, above);
    EXPECT_NEAR(b.base_scale, std::cbrt(static_cast<double>(above) / 40.0), 1e-12);
    for (const auto& p : b.set.primitives) {
        // Jitter stays within half a voxel of an above-threshold voxel center.
        const Vec3 rounded = (p.center - v.grid.origin).array().round();
        const Vec3 center = v.grid.origin + rounded;
        EXPECT_LE((p.center - center).cwiseAbs().maxCoeff(), 0.5 + 1e-12);
        EXPECT_LT(center.norm(), 3.0);
        EXPECT_EQ(p.scales, Vec3::Constant(b.base_scale));
        const auto idx = v.grid.index(std::size_t(rounded[0]), std::size_t(rounded[1]), std::size_t(rounded[2]));
        EXPECT_NEAR(p.density, v.values[idx] * cfg.base_density_scale, 1e-15);
    }
}

TEST(InitBase, DeterministicPerSeed) {
    const VoxelVolume v = blob_volume();
    InitConfig cfg;
    cfg.n_base = 25;
    cfg.seed = 9;
    EXPECT_EQ(init_base(v, cfg).set, init_base(v, cfg).set);
    InitConfig other = cfg;
    other.seed = 10;
    EXPECT_NE(init_base(v, cfg).set, init_base(v, other).set);
}

TEST(InitBase, ShortfallWhenFewCandidates) {
    const VoxelVolume v = blob_volume();
    InitConfig cfg;
    cfg.n_base = 100000;
    const BaseInit b = init_base(v, cfg);
    EXPECT_EQ(b.set.size(), b.candidates);
    EXPECT_EQ(b.shortfall, cfg.n_base - b.candidates);
    // One primitive per candidate voxel gives the voxel pitch as scale.
    EXPECT_NEAR(b.base_scale, 1.0, 1e-12);
}

TEST(InitBase, AllAirThrows) {
    VoxelVolume v(GridSpec::centered({4, 4, 4}, Vec3::Ones()));
    InitConfig cfg;
    EXPECT_THROW(init_base(v, cfg), std::runtime_error);
    v.values[3] = -1.0;
    EXPECT_THROW(init_base(v, cfg), std::invalid_argument);
}

TEST(InitBase, DensityScaleReproducesLatticeValue) {
    // Isotropic Gaussians of scale s on a lattice of pitch s sum to
    // density * (2π)^(3/2) away from the edges (Poisson summation).
    InitConfig cfg;
    const double value = 0.7, s = 1.3;
    GaussianSet lattice;
    for (int i = -8; i <= 8; ++i)
        for (int j = -8; j <= 8; ++j)
            for (int k = -8; k <= 8; ++k) {
                GaussianPrimitive p;
                p.center = s * Vec3(i, j, k);
                p.scales = Vec3::Constant(s);
                p.density = value * cfg.base_density_scale;
                lattice.primitives.push_back(p);
            }
    EXPECT_NEAR(evaluate_field({lattice}, Vec3(0.3, -0.2, 0.45), kNoCutoff), value, 1e-6);
    EXPECT_NEAR(cfg.base_density_scale, std::pow(2.0 * std::numbers::pi, -1.5), 1e-15);
}

TEST(TopFraction, CountAndTieBreak) {
    VoxelVolume v(GridSpec::centered({5, 2, 2}, Vec3::Ones()));
    for (std::size_t m = 0; m < v.values.size(); ++m) v.values[m] = static_cast<double>(m % 4);
    // 20 voxels, k = 0.2 -> 4 kept; value 3 at indices 3, 7, 11, 15, 19.
    const auto idx = top_fraction_indices(v, 0.2);
    EXPECT_EQ(idx, (std::vector<std::size_t>{3, 7, 11, 15}));
    EXPECT_EQ(top_fraction_indices(v, 0.01).size(), 1u);
    EXPECT_EQ(top_fraction_indices(v, 1.0).size(), 20u);
}

TEST(InitDetail, ScalesAndDensities) {
    VoxelVolume sal = blob_volume();
    InitConfig cfg;
    cfg.n_detail = 12;
    cfg.k = 0.1;
    const GaussianSet d = init_detail(sal, cfg, 2.0, 0.5);
    ASSERT_EQ(d.size(), 12u);
    EXPECT_EQ(d.tag, ComponentTag::detail);
    const auto top = top_fraction_indices(sal, cfg.k);
    for (const auto& p : d.primitives) {
        EXPECT_EQ(p.scales, Vec3::Constant(1.0));
        EXPECT_DOUBLE_EQ(p.density, cfg.detail_initial_density * 0.5);
        const Vec3 r = (p.center - sal.grid.origin).array().round();
        const auto m = sal.grid.index(std::size_t(r[0]), std::size_t(r[1]), std::size_t(r[2]));
        EXPECT_TRUE(std::binary_search(top.begin(), top.end(), m));
    }
}

TEST(InitDetail, ZeroSaliencyThrows) {
    VoxelVolume sal(GridSpec::centered({4, 4, 4}, Vec3::Ones()));
    InitConfig cfg;
    EXPECT_THROW(init_detail(sal, cfg, 1.0, 1.0), std::runtime_error);
}

TEST(InitConfig, Validation) {
    InitConfig cfg;
    cfg.validate();
    cfg.k = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = InitConfig{};
    cfg.tau_air = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = InitConfig{};
    cfg.n_detail = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(InitBase, UniformVolumeSpreadsEvenlyOverOctants) {
    VoxelVolume v(GridSpec::centered({16, 16, 16}, Vec3::Ones()), 1.0);
    InitConfig cfg;
    cfg.tau_air = 0.0;
    cfg.n_base = 800;
    cfg.seed = 41;
    const BaseInit b = init_base(v, cfg);
    EXPECT_EQ(b.candidates, 4096u);
    std::array<double, 8> counts{};
    for (const auto& p : b.set.primitives)
        counts[(p.center.x() > 0) + 2 * (p.center.y() > 0) + 4 * (p.center.z() > 0)] += 1.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - 100.0) * (c - 100.0) / 100.0;
    // Upper 1% point of chi-square with 7 degrees of freedom.
    EXPECT_LT(chi2, 18.475);
}

TEST(InitDetail, ConcentratedSaliencyStaysInItsOctant) {
    VoxelVolume sal(GridSpec::centered({12, 12, 12}, Vec3::Ones()), 0.0);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    for (std::size_t k = 0; k < 12; ++k)
        for (std::size_t j = 0; j < 12; ++j)
            for (std::size_t i = 0; i < 12; ++i)
                sal.at(i, j, k) = (i >= 6 && j >= 6 && k >= 6) ? u(rng) : 1e-3 * u(rng);
    InitConfig cfg;
    cfg.k = 0.1;
    cfg.n_detail = 100;
    const GaussianSet d = init_detail(sal, cfg, 2.0, 1.0);
    std::size_t inside = 0;
    for (const auto& p : d.primitives) inside += (p.center.array() > 0.0).all();
    EXPECT_GE(inside, 95u);
}

TEST(InitDetail, DetailScalesBelowBaseScales) {
    const VoxelVolume v = blob_volume();
    InitConfig cfg;
    cfg.n_base = 30;
    cfg.n_detail = 10;
    const BaseInit b = init_base(v, cfg);
    const GaussianSet d = init_detail(v, cfg, b.base_scale, 1.0);
    for (const auto& p : d.primitives)
        for (const auto& q : b.set.primitives) EXPECT_LT(p.scales.maxCoeff(), q.scales.minCoeff());
}
