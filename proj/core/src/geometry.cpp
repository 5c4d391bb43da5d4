#include "rgs/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace rgs {

void ConeBeamGeometry::validate() const {
    if (!(sad > 0.0)) throw std::invalid_argument("geometry: sad must be positive");
    if (!(sdd > sad)) throw std::invalid_argument("geometry: sdd must exceed sad");
    if (detector_rows < 2 || detector_rows % 2 != 0)
        throw std::invalid_argument("geometry: detector_rows must be even and >= 2");
    if (detector_cols < 2 || detector_cols % 2 != 0)
        throw std::invalid_argument("geometry: detector_cols must be even and >= 2");
    if (!(pixel_pitch_u > 0.0) || !(pixel_pitch_v > 0.0))
        throw std::invalid_argument("geometry: pixel pitch must be positive");
    if (!std::isfinite(detector_offset_u) || !std::isfinite(detector_offset_v))
        throw std::invalid_argument("geometry: detector offsets must be finite");
    if (angles.empty()) throw std::invalid_argument("geometry: at least one angle required");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        if (!(angles[i] >= 0.0 && angles[i] < two_pi))
            throw std::invalid_argument("geometry: angle " + std::to_string(i) +
                                        " outside [0, 2pi)");
        if (i > 0 && !(angles[i] > angles[i - 1]))
            throw std::invalid_argument("geometry: angles must be strictly increasing");
    }
}

std::vector<double> ConeBeamGeometry::full_scan_angles(std::size_t views) {
    std::vector<double> out(views);
    for (std::size_t i = 0; i < views; ++i)
        out[i] = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(views);
    return out;
}

namespace {

void check_view(const ConeBeamGeometry& geom, std::size_t view_index) {
    if (view_index >= geom.angles.size())
        throw std::out_of_range("view index " + std::to_string(view_index) + " out of range (" +
                                std::to_string(geom.angles.size()) + " views)");
}

}  // namespace

ViewFrame view_frame(const ConeBeamGeometry& geom, std::size_t view_index) {
    check_view(geom, view_index);
    const double beta = geom.angles[view_index];
    const double c = std::cos(beta);
    const double s = std::sin(beta);
    ViewFrame f;
    f.axis = Vec3(c, s, 0.0);
    f.source = -geom.sad * f.axis;
    f.detector_center = f.source + geom.sdd * f.axis;
    f.eu = Vec3(-s, c, 0.0);
    f.ev = Vec3::UnitZ();
    return f;
}

Vec3 source_position(const ConeBeamGeometry& geom, std::size_t view_index) {
    return view_frame(geom, view_index).source;
}

double detector_u_mm(const ConeBeamGeometry& geom, double u_index) {
    const double center = 0.5 * static_cast<double>(geom.detector_cols - 1);
    return (u_index - center) * geom.pixel_pitch_u + geom.detector_offset_u;
}

double detector_v_mm(const ConeBeamGeometry& geom, double v_index) {
    const double center = 0.5 * static_cast<double>(geom.detector_rows - 1);
    return (v_index - center) * geom.pixel_pitch_v + geom.detector_offset_v;
}

Vec3 pixel_position(const ConeBeamGeometry& geom, std::size_t view_index, std::size_t u,
                    std::size_t v) {
    if (u >= geom.detector_cols || v >= geom.detector_rows)
        throw std::out_of_range("pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                                ") outside detector");
    const ViewFrame f = view_frame(geom, view_index);
    return f.detector_center + detector_u_mm(geom, static_cast<double>(u)) * f.eu +
           detector_v_mm(geom, static_cast<double>(v)) * f.ev;
}

std::pair<double, double> clip_to_box(const Vec3& origin, const Vec3& direction,
                                      const Box3& bbox) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        if (direction[k] == 0.0) {
            if (origin[k] < bbox.lo[k] || origin[k] > bbox.hi[k]) return {0.0, 0.0};
            continue;
        }
        const double inv = 1.0 / direction[k];
        double ta = (bbox.lo[k] - origin[k]) * inv;
        double tb = (bbox.hi[k] - origin[k]) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    t0 = std::max(t0, 0.0);
    if (!(t0 < t1)) return {t0, t0};
    return {t0, t1};
}

Ray ray_for_pixel(const ConeBeamGeometry& geom, std::size_t view_index, std::size_t u,
                  std::size_t v, const Box3& bbox) {
    const Vec3 target = pixel_position(geom, view_index, u, v);
    Ray ray;
    ray.origin = source_position(geom, view_index);
    ray.direction = (target - ray.origin).normalized();
    const auto [tn, tf] = clip_to_box(ray.origin, ray.direction, bbox);
    ray.t_near = tn;
    ray.t_far = tf;
    return ray;
}

std::optional<DetectorHit> project_point(const ConeBeamGeometry& geom, std::size_t view_index,
                                         const Vec3& x) {
    const ViewFrame f = view_frame(geom, view_index);
    const Vec3 rel = x - f.source;
    const double depth = rel.dot(f.axis);
    if (!(depth > 0.0)) return std::nullopt;
    const double scale = geom.sdd / depth;
    const double u_mm = rel.dot(f.eu) * scale;
    const double v_mm = rel.dot(f.ev) * scale;
    DetectorHit hit;
    hit.u = (u_mm - geom.detector_offset_u) / geom.pixel_pitch_u +
            0.5 * static_cast<double>(geom.detector_cols - 1);
    hit.v = (v_mm - geom.detector_offset_v) / geom.pixel_pitch_v +
            0.5 * static_cast<double>(geom.detector_rows - 1);
    hit.depth = depth;
    return hit;
}

}  // namespace rgs
