#include "rgs/phantom.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace rgs;

namespace {

// Fine ray march of the membership sum along a ray, step `h`.
double march(const AnalyticPhantom& ph, const Vec3& origin, const Vec3& dir, double t0, double t1, double h) {
    double sum = 0.0;
    for (double t = t0 + 0.5 * h; t < t1; t += h) sum += ph.value_at(origin + t * dir) * h;
    return sum;
}

}  // namespace

TEST(Phantom, EmptyRasterizesToZero) {
    const VoxelVolume v = rasterize_phantom(AnalyticPhantom{}, GridSpec::centered({8, 8, 8}, Vec3::Ones()));
    for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(Phantom, BallVolumeMatches) {
    const double r = 18.0;
    const GridSpec grid = GridSpec::centered({64, 64, 64}, Vec3::Constant(0.7));
    const VoxelVolume v = rasterize_phantom(ball_phantom(r, 1.0), grid);
    double count = 0.0;
    for (double x : v.values) count += x;
    const double analytic = 4.0 / 3.0 * std::numbers::pi * r * r * r;
    EXPECT_NEAR(count * grid.voxel_volume(), analytic, 0.02 * analytic);
}

TEST(Phantom, NestedDeltasSum) {
    AnalyticPhantom ph;
    Ellipsoid outer;
    outer.semi_axes = Vec3(5, 4, 3);
    outer.delta = 2.0;
    Ellipsoid inner;
    inner.semi_axes = Vec3(2, 2, 2);
    inner.delta = -1.0;
    ph.ellipsoids = {outer, inner};
    EXPECT_EQ(ph.value_at(Vec3::Zero()), 1.0);
    EXPECT_EQ(ph.value_at(Vec3(4.5, 0, 0)), 2.0);
    EXPECT_EQ(ph.value_at(Vec3(0, 0, 3.5)), 0.0);
}

TEST(Drr, MissIsZeroAndCenterIsDiameter) {
    ConeBeamGeometry g = ref::small_geometry(3, 16, 16, 1.0);
    const double r = 5.0, mu = 0.03;
    const ProjectionStack s = simulate_drr(ball_phantom(r, mu), g);
    // Row 0 col 0 lies 7.5 mm off axis on the panel, 5 mm at the isocenter: just outside.
    for (std::size_t v = 0; v < 3; ++v) EXPECT_EQ(s.views[v](0, 0), 0.0);
    // The central ray lies between pixels; one pixel off center the chord is close to 2R.
    const Box3 box{Vec3::Constant(-10), Vec3::Constant(10)};
    const Ray ray = ray_for_pixel(g, 0, 8, 8, box);
    const double dist = (ray.origin + (-ray.origin).dot(ray.direction) * ray.direction).norm();
    EXPECT_NEAR(s.views[0](8, 8), 2.0 * std::sqrt(r * r - dist * dist) * mu, 1e-12);
}

TEST(Drr, CentralChordExact) {
    Ellipsoid e;
    e.semi_axes = Vec3::Constant(4.0);
    EXPECT_NEAR(e.chord_length(Vec3(-50, 0, 0), Vec3::UnitX()), 8.0, 1e-12);
    EXPECT_EQ(e.chord_length(Vec3(-50, 4.5, 0), Vec3::UnitX()), 0.0);
}

TEST(Drr, MatchesRayMarching) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        AnalyticPhantom ph;
        Ellipsoid e;
        e.center = Vec3(u(rng), u(rng), u(rng)) * 2.0;
        e.semi_axes = Vec3(4 + u(rng), 3 + u(rng), 5 + u(rng));
        e.rotation = ref::random_quaternion(rng);
        e.delta = 0.02;
        ph.ellipsoids = {e};
        Vec3 dir(u(rng), u(rng), u(rng));
        dir.normalize();
        const Vec3 origin = e.center + Vec3(u(rng), u(rng), u(rng)) - 30.0 * dir;
        const double exact = e.delta * e.chord_length(origin, dir);
        if (exact < 0.02) continue;
        const double h = e.semi_axes.maxCoeff() / 1000.0;
        EXPECT_LT(ref::rel_err(exact, march(ph, origin, dir, 0.0, 60.0, h)), 1e-3);
    }
}

TEST(Drr, LinearInDeltas) {
    ConeBeamGeometry g = ref::small_geometry(2, 8, 8, 2.0);
    AnalyticPhantom a = shepp_logan_phantom(Vec3(6, 6, 5), 0.02);
    AnalyticPhantom b = a;
    for (auto& e : b.ellipsoids) e.delta *= 3.0;
    const ProjectionStack pa = simulate_drr(a, g);
    const ProjectionStack pb = simulate_drr(b, g);
    for (std::size_t v = 0; v < 2; ++v)
        for (std::size_t q = 0; q < pa.views[v].size(); ++q)
            EXPECT_NEAR(pb.views[v].data[q], 3.0 * pa.views[v].data[q], 1e-12);
}

TEST(Phantoms, StockPhantomsNonNegative) {
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> u(-22.0, 22.0);
    for (const AnalyticPhantom& ph :
         {shepp_logan_phantom(Vec3(20, 20, 16)), texture_phantom(Vec3(20, 20, 16))}) {
        ph.validate();
        for (int i = 0; i < 20000; ++i) EXPECT_GE(ph.value_at(Vec3(u(rng), u(rng), u(rng))), -1e-15);
        EXPECT_GT(ph.value_at(Vec3::Zero()), 0.0);
    }
}

TEST(Phantoms, MalformedRejected) {
    AnalyticPhantom ph;
    Ellipsoid e;
    e.semi_axes = Vec3(1, 0, 1);
    ph.ellipsoids = {e};
    EXPECT_THROW(ph.validate(), std::invalid_argument);
}

TEST(Noise, HugeDoseIsIdentity) {
    ConeBeamGeometry g = ref::small_geometry(2, 4, 4);
    ProjectionStack s = ProjectionStack::zeros(g);
    s.views[1](2, 2) = 0.7;
    EXPECT_EQ(add_noise(s, 1e12, 5), s);
    EXPECT_THROW(add_noise(s, 0.0, 5), std::invalid_argument);
}

TEST(Noise, Reproducible) {
    ConeBeamGeometry g = ref::small_geometry(2, 8, 8);
    ProjectionStack s = ProjectionStack::zeros(g);
    EXPECT_EQ(add_noise(s, 1e3, 9), add_noise(s, 1e3, 9));
    EXPECT_NE(add_noise(s, 1e3, 9), add_noise(s, 1e3, 10));
}

TEST(Noise, StatisticsMatchPoissonModel) {
    const double i0 = 1e4;
    ConeBeamGeometry g = ref::small_geometry(4, 64, 64);
    for (double level : {0.0, 3.0}) {
        ProjectionStack s = ProjectionStack::zeros(g);
        for (auto& img : s.views) std::fill(img.data.begin(), img.data.end(), level);
        const ProjectionStack n = add_noise(s, i0, 77);
        // Exact moments of max(ln(i0 / max(N, 1)), 0) with N ~ Poisson(i0 e^-level).
        const double lam = i0 * std::exp(-level);
        double m1 = 0.0, m2 = 0.0;
        for (long k = std::max(0L, long(lam - 12 * std::sqrt(lam))); k < long(lam + 12 * std::sqrt(lam)); ++k) {
            const double logp = -lam + k * std::log(lam) - std::lgamma(k + 1.0);
            const double x = std::max(std::log(i0 / std::max<double>(k, 1.0)), 0.0);
            m1 += std::exp(logp) * x;
            m2 += std::exp(logp) * x * x;
        }
        const double sd = std::sqrt(m2 - m1 * m1);
        double sum = 0.0, sum2 = 0.0;
        std::size_t count = 0;
        for (const auto& img : n.views)
            for (double x : img.data) sum += x, sum2 += x * x, ++count;
        const double mean = sum / count;
        const double var = sum2 / count - mean * mean;
        EXPECT_NEAR(mean, m1, 4.0 * sd / std::sqrt(double(count)));
        EXPECT_NEAR(std::sqrt(var), sd, 0.05 * sd);
        if (level == 3.0) EXPECT_NEAR(sd, 1.0 / std::sqrt(lam), 0.02 / std::sqrt(lam));
    }
}
