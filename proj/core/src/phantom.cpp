#include "rgs/phantom.hpp"

#include "rgs/parallel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace rgs {

namespace {

Vec4 quat_about_z(double degrees) {
    const double half = 0.5 * degrees * std::numbers::pi / 180.0;
    return Vec4(std::cos(half), 0.0, 0.0, std::sin(half));
}

}  // namespace

bool Ellipsoid::contains(const Vec3& x) const {
    const Vec3 local = rotation_matrix(rotation).transpose() * (x - center);
    return local.cwiseQuotient(semi_axes).squaredNorm() <= 1.0;
}

double Ellipsoid::chord_length(const Vec3& origin, const Vec3& unit_direction) const {
    const Mat3 rt = rotation_matrix(rotation).transpose();
    const Vec3 o = (rt * (origin - center)).cwiseQuotient(semi_axes);
    const Vec3 d = (rt * unit_direction).cwiseQuotient(semi_axes);
    const double a = d.squaredNorm();
    const double b = o.dot(d);
    const double c = o.squaredNorm() - 1.0;
    const double disc = b * b - a * c;
    if (!(disc > 0.0)) return 0.0;
    return 2.0 * std::sqrt(disc) / a;
}

double AnalyticPhantom::value_at(const Vec3& x) const {
    double sum = 0.0;
    for (const Ellipsoid& e : ellipsoids)
        if (e.contains(x)) sum += e.delta;
    return sum;
}

void AnalyticPhantom::validate() const {
    for (std::size_t i = 0; i < ellipsoids.size(); ++i) {
        const Ellipsoid& e = ellipsoids[i];
        if (!e.center.allFinite() || !e.semi_axes.allFinite() || (e.semi_axes.array() <= 0.0).any() ||
            !e.rotation.allFinite() || e.rotation.norm() == 0.0 || !std::isfinite(e.delta))
            throw std::invalid_argument("phantom: ellipsoid " + std::to_string(i) + " is malformed");
    }
}

VoxelVolume rasterize_phantom(const AnalyticPhantom& phantom, const GridSpec& grid) {
    grid.validate();
    phantom.validate();
    VoxelVolume out(grid);
    parallel_for(grid.dims[2], [&](std::size_t k) {
        for (std::size_t j = 0; j < grid.dims[1]; ++j)
            for (std::size_t i = 0; i < grid.dims[0]; ++i)
                out.at(i, j, k) = phantom.value_at(grid.voxel_center(i, j, k));
    });
    return out;
}

ProjectionStack simulate_drr(const AnalyticPhantom& phantom, const ConeBeamGeometry& geom) {
    geom.validate();
    phantom.validate();
    ProjectionStack out = ProjectionStack::zeros(geom);
    parallel_for(geom.views(), [&](std::size_t view) {
        const ViewFrame f = view_frame(geom, view);
        Image2D& img = out.views[view];
        for (std::size_t v = 0; v < geom.detector_rows; ++v) {
            const double vmm = detector_v_mm(geom, static_cast<double>(v));
            for (std::size_t u = 0; u < geom.detector_cols; ++u) {
                const double umm = detector_u_mm(geom, static_cast<double>(u));
                const Vec3 dir = (f.detector_center + umm * f.eu + vmm * f.ev - f.source).normalized();
                double sum = 0.0;
                for (const Ellipsoid& e : phantom.ellipsoids) sum += e.delta * e.chord_length(f.source, dir);
                // Overlapping deltas sum to a non-negative field, so only
                // round-off can push a line integral below zero.
                img(v, u) = std::max(sum, 0.0);
            }
        }
    });
    return out;
}

ProjectionStack add_noise(const ProjectionStack& stack, double i0, std::uint64_t seed) {
    if (!(i0 > 0.0)) throw std::invalid_argument("add_noise: i0 must be positive");
    if (i0 >= 1e12) return stack;
    ProjectionStack out = stack;
    std::mt19937_64 rng(seed);
    for (Image2D& img : out.views) {
        for (double& p : img.data) {
            std::poisson_distribution<long long> counts(i0 * std::exp(-p));
            const double detected = std::max(static_cast<double>(counts(rng)), 1.0);
            p = std::max(std::log(i0 / detected), 0.0);
        }
    }
    return out;
}

AnalyticPhantom shepp_logan_phantom(const Vec3& half_extent, double scale) {
    struct Row {
        double x, y, z, a, b, c, phi, delta;
    };
    // Kak & Slaney 3D layout with the higher-contrast (Toft) intensities.
    static constexpr Row rows[] = {
        {0.0, 0.0, 0.0, 0.69, 0.92, 0.9, 0.0, 1.0},
        {0.0, 0.0, 0.0, 0.6624, 0.874, 0.88, 0.0, -0.8},
        {-0.22, 0.0, -0.25, 0.41, 0.16, 0.21, 108.0, -0.2},
        {0.22, 0.0, -0.25, 0.31, 0.11, 0.22, 72.0, -0.2},
        {0.0, 0.35, -0.25, 0.21, 0.25, 0.5, 0.0, 0.1},
        {0.0, 0.1, -0.25, 0.046, 0.046, 0.046, 0.0, 0.1},
        {-0.08, -0.65, -0.25, 0.046, 0.023, 0.02, 0.0, 0.1},
        {0.06, -0.65, -0.25, 0.046, 0.023, 0.02, 90.0, 0.1},
        {0.06, -0.105, 0.625, 0.056, 0.04, 0.1, 90.0, 0.1},
        {0.0, 0.1, 0.625, 0.056, 0.056, 0.1, 0.0, 0.1},
    };
    AnalyticPhantom ph;
    // Outer ellipsoid has semi-axes (0.69, 0.92, 0.9); normalise so it spans half_extent.
    const Vec3 unit = half_extent.cwiseQuotient(Vec3(0.69, 0.92, 0.9));
    for (const Row& r : rows) {
        Ellipsoid e;
        e.center = Vec3(r.x, r.y, r.z).cwiseProduct(unit);
        e.semi_axes = Vec3(r.a, r.b, r.c).cwiseProduct(unit);
        e.rotation = quat_about_z(r.phi);
        e.delta = r.delta * scale;
        ph.ellipsoids.push_back(e);
    }
    ph.bbox = Box3{-half_extent, half_extent};
    return ph;
}

AnalyticPhantom texture_phantom(const Vec3& half_extent, double scale) {
    AnalyticPhantom ph;
    auto add = [&](Vec3 c, Vec3 axes, double phi, double delta) {
        Ellipsoid e;
        e.center = c.cwiseProduct(half_extent);
        e.semi_axes = axes.cwiseProduct(half_extent);
        e.rotation = quat_about_z(phi);
        e.delta = delta * scale;
        ph.ellipsoids.push_back(e);
    };
    // Body, a denser organ and a lighter cavity.
    add({0.0, 0.0, 0.0}, {0.85, 0.72, 0.85}, 0.0, 1.0);
    add({-0.32, 0.12, 0.0}, {0.28, 0.22, 0.5}, 20.0, 0.5);
    add({0.35, -0.18, 0.08}, {0.24, 0.18, 0.4}, -30.0, -0.5);
    // 4 x 4 grid of thin axial rods with alternating radii.
    const double pos[] = {-0.45, -0.15, 0.15, 0.45};
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            const double r = ((a + b) % 2 == 0) ? 0.035 : 0.055;
            add({pos[a], pos[b] * 0.8, 0.0}, {r, r, 0.55}, 0.0, 1.0);
        }
    }
    // Small beads above and below the rods.
    for (int a = 0; a < 4; ++a) {
        const double x = -0.45 + 0.3 * a;
        add({x, 0.0, 0.68}, {0.06, 0.06, 0.06}, 0.0, 1.5);
        add({-x, 0.2, -0.68}, {0.05, 0.05, 0.05}, 0.0, 1.5);
    }
    ph.bbox = Box3{-half_extent, half_extent};
    return ph;
}

AnalyticPhantom ball_phantom(double radius, double mu) {
    AnalyticPhantom ph;
    Ellipsoid e;
    e.semi_axes = Vec3::Constant(radius);
    e.delta = mu;
    ph.ellipsoids.push_back(e);
    ph.bbox = Box3{Vec3::Constant(-radius), Vec3::Constant(radius)};
    return ph;
}

}  // namespace rgs
