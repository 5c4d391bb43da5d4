#pragma once

#include "rgs/types.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace rgs {

/// Circular cone-beam acquisition with a flat-panel detector.
///
/// World frame: rotation axis is z, the source sits at distance `sad` from the
/// isocenter in the z = 0 plane at (-sad, 0, 0) for gantry angle 0 and rotates
/// counter-clockwise with the angle. The detector u axis lies in the rotation
/// plane, v is parallel to z. Pixel indices address pixel centers.
struct ConeBeamGeometry {
    double sad = 400.0;  ///< source-to-axis distance, mm
    double sdd = 600.0;  ///< source-to-detector distance, mm
    std::size_t detector_rows = 64;
    std::size_t detector_cols = 96;
    double pixel_pitch_u = 1.0;  ///< mm per pixel along u
    double pixel_pitch_v = 1.0;  ///< mm per pixel along v
    std::vector<double> angles;  ///< gantry angles in radians
    double detector_offset_u = 0.0;  ///< mm
    double detector_offset_v = 0.0;  ///< mm

    std::size_t views() const { return angles.size(); }
    std::size_t pixels_per_view() const { return detector_rows * detector_cols; }

    /// Throws std::invalid_argument naming the violated invariant.
    void validate() const;

    /// `views` equally spaced angles over [0, 2π).
    static std::vector<double> full_scan_angles(std::size_t views);

    bool operator==(const ConeBeamGeometry&) const = default;
};

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitX();
    double t_near = 0.0;
    double t_far = 0.0;

    Vec3 at(double t) const { return origin + t * direction; }
};

/// Per-view orthonormal frame of the source and detector.
struct ViewFrame {
    Vec3 source;
    Vec3 detector_center;  ///< point on the panel hit by the central ray
    Vec3 axis;             ///< unit vector from source toward detector center
    Vec3 eu;               ///< detector u direction
    Vec3 ev;               ///< detector v direction (= +z)
};

ViewFrame view_frame(const ConeBeamGeometry& geom, std::size_t view_index);

Vec3 source_position(const ConeBeamGeometry& geom, std::size_t view_index);

/// Center of detector pixel (u, v) in world coordinates.
Vec3 pixel_position(const ConeBeamGeometry& geom, std::size_t view_index, std::size_t u,
                    std::size_t v);

/// Source-to-pixel ray clipped to `bbox`. A ray that misses the box gets
/// t_near == t_far. Throws std::out_of_range for bad indices.
Ray ray_for_pixel(const ConeBeamGeometry& geom, std::size_t view_index, std::size_t u,
                  std::size_t v, const Box3& bbox);

/// Slab clipping of an origin/direction pair against a box.
/// Returns {t_near, t_far}; equal values when the line misses.
std::pair<double, double> clip_to_box(const Vec3& origin, const Vec3& direction,
                                      const Box3& bbox);

/// Continuous pixel coordinates of a world point projected onto the detector.
struct DetectorHit {
    double u = 0.0;      ///< column coordinate in pixel units (0 = first pixel center)
    double v = 0.0;      ///< row coordinate in pixel units
    double depth = 0.0;  ///< distance of the point from the source along the central axis, mm
};

/// Perspective projection of `x`. Empty when the point is at or behind the
/// source plane.
std::optional<DetectorHit> project_point(const ConeBeamGeometry& geom, std::size_t view_index,
                                         const Vec3& x);

/// Pixel-center coordinates in detector millimetres relative to the principal point.
double detector_u_mm(const ConeBeamGeometry& geom, double u_index);
double detector_v_mm(const ConeBeamGeometry& geom, double v_index);

}  // namespace rgs
