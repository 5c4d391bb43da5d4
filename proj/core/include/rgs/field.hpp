#pragma once

#include "rgs/types.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <string_view>
#include <vector>

namespace rgs {

/// Support truncation radius in Mahalanobis units.
inline constexpr double kDefaultCutoff = 3.0;
inline constexpr double kNoCutoff = std::numeric_limits<double>::infinity();

/// One anisotropic attenuation blob: density * exp(-1/2 d^T Σ^-1 d),
/// Σ = R S S^T R^T with S = diag(scales) and R from the unit quaternion.
struct GaussianPrimitive {
    Vec3 center = Vec3::Zero();
    Vec3 scales = Vec3::Ones();
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);  ///< (w, x, y, z)
    double density = 0.0;

    bool operator==(const GaussianPrimitive&) const = default;
};

enum class ComponentTag { base, detail };

std::string_view to_string(ComponentTag tag);
ComponentTag component_tag_from_string(std::string_view name);

struct GaussianSet {
    ComponentTag tag = ComponentTag::base;
    std::vector<GaussianPrimitive> primitives;

    std::size_t size() const { return primitives.size(); }
    bool empty() const { return primitives.empty(); }
    bool operator==(const GaussianSet&) const = default;
};

using SetRefs = std::vector<std::reference_wrapper<const GaussianSet>>;

/// Rotation matrix of q / |q|.
Mat3 rotation_matrix(const Vec4& q);

Mat3 covariance_of(const GaussianPrimitive& p);

/// Σ^-1 = R S^-2 R^T. Throws NumericalError naming `index` when the scales are
/// not finite and positive.
Mat3 precision_of(const GaussianPrimitive& p, std::size_t index = 0);

/// Cartesian sampling grid; `origin` is the center of voxel (0, 0, 0) and
/// values are stored x-fastest.
struct GridSpec {
    std::array<std::size_t, 3> dims{1, 1, 1};
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + dims[0] * (j + dims[1] * k);
    }
    Vec3 voxel_center(std::size_t i, std::size_t j, std::size_t k) const {
        return origin + Vec3(static_cast<double>(i) * spacing[0], static_cast<double>(j) * spacing[1],
                             static_cast<double>(k) * spacing[2]);
    }
    /// Outer faces of the voxel grid.
    Box3 bounds() const;
    double voxel_volume() const { return spacing.prod(); }

    /// Throws std::invalid_argument for empty dims or non-positive spacing.
    void validate() const;

    /// Grid whose center coincides with the isocenter.
    static GridSpec centered(std::array<std::size_t, 3> dims, Vec3 spacing);

    bool operator==(const GridSpec&) const = default;
};

struct VoxelVolume {
    GridSpec grid;
    std::vector<double> values;

    VoxelVolume() = default;
    explicit VoxelVolume(const GridSpec& g, double fill = 0.0)
        : grid(g), values(g.voxel_count(), fill) {}

    double& at(std::size_t i, std::size_t j, std::size_t k) { return values[grid.index(i, j, k)]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return values[grid.index(i, j, k)];
    }
    double max_value() const;
    double min_value() const;

    bool operator==(const VoxelVolume&) const = default;
};

/// Sum over all primitives within `cutoff` Mahalanobis units of x.
double evaluate_field(const SetRefs& sets, const Vec3& x, double cutoff = kDefaultCutoff);

/// Field sampled at every voxel center, rasterized primitive by primitive over
/// each primitive's cutoff bounding box.
VoxelVolume voxelize(const SetRefs& sets, const GridSpec& grid, double cutoff = kDefaultCutoff);

/// Half-extent of the axis-aligned box enclosing the `cutoff` ellipsoid.
Vec3 support_half_extent(const Mat3& covariance, double cutoff);

}  // namespace rgs
