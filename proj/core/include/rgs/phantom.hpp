#pragma once

#include "rgs/field.hpp"
#include "rgs/geometry.hpp"
#include "rgs/projector.hpp"

#include <cstdint>
#include <vector>

namespace rgs {

/// Solid ellipsoid with a signed attenuation increment (Shepp-Logan style
/// additive composition).
struct Ellipsoid {
    Vec3 center = Vec3::Zero();
    Vec3 semi_axes = Vec3::Ones();
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);  ///< (w, x, y, z)
    double delta = 0.0;                        ///< attenuation per mm

    bool contains(const Vec3& x) const;
    /// Length of the intersection of the infinite line with the ellipsoid.
    double chord_length(const Vec3& origin, const Vec3& unit_direction) const;

    bool operator==(const Ellipsoid&) const = default;
};

struct AnalyticPhantom {
    std::vector<Ellipsoid> ellipsoids;
    Box3 bbox;

    double value_at(const Vec3& x) const;
    /// Throws std::invalid_argument if any ellipsoid is malformed.
    void validate() const;

    bool operator==(const AnalyticPhantom&) const = default;
};

/// Voxel centers tested against the analytic membership sum.
VoxelVolume rasterize_phantom(const AnalyticPhantom& phantom, const GridSpec& grid);

/// Exact line integrals through the ellipsoids for every detector pixel.
ProjectionStack simulate_drr(const AnalyticPhantom& phantom, const ConeBeamGeometry& geom);

/// Monochromatic Poisson noise at incident photon count `i0`. Values of
/// i0 >= 1e12 return the input unchanged.
ProjectionStack add_noise(const ProjectionStack& stack, double i0, std::uint64_t seed);

/// 3D Shepp-Logan head scaled so its outer ellipsoid spans `half_extent`
/// (mm) along each axis. Densities are multiplied by `scale`.
AnalyticPhantom shepp_logan_phantom(const Vec3& half_extent, double scale = 0.02);

/// Coarse ellipsoidal body with a grid of thin high-contrast rods and beads.
AnalyticPhantom texture_phantom(const Vec3& half_extent, double scale = 0.02);

/// Single ball of radius `radius` and attenuation `mu` at the isocenter.
AnalyticPhantom ball_phantom(double radius, double mu);

}  // namespace rgs
