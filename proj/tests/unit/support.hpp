#pragma once

#include "rgs/field.hpp"
#include "rgs/geometry.hpp"
#include "rgs/types.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace rgs::ref {

inline ConeBeamGeometry small_geometry(std::size_t views, std::size_t rows = 16, std::size_t cols = 16,
                                       double pitch = 2.0) {
    ConeBeamGeometry g;
    g.detector_rows = rows;
    g.detector_cols = cols;
    g.pixel_pitch_u = g.pixel_pitch_v = pitch;
    g.angles = ConeBeamGeometry::full_scan_angles(views);
    return g;
}

inline Vec4 random_quaternion(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q / q.norm();
}

inline GaussianPrimitive random_primitive(std::mt19937_64& rng, double spread = 4.0, double smin = 0.8,
                                          double smax = 2.5) {
    std::uniform_real_distribution<double> pos(-spread, spread);
    std::uniform_real_distribution<double> sc(smin, smax);
    std::uniform_real_distribution<double> dens(0.1, 1.0);
    GaussianPrimitive p;
    p.center = Vec3(pos(rng), pos(rng), pos(rng));
    p.scales = Vec3(sc(rng), sc(rng), sc(rng));
    p.rotation = random_quaternion(rng);
    p.density = dens(rng);
    return p;
}

inline GaussianSet random_set(std::mt19937_64& rng, std::size_t n, double spread = 4.0) {
    GaussianSet s;
    for (std::size_t i = 0; i < n; ++i) s.primitives.push_back(random_primitive(rng, spread));
    return s;
}

/// Plain Gaussian value without any truncation, written out independently of
/// the library's precision helpers.
inline double gaussian_value(const GaussianPrimitive& p, const Vec3& x) {
    const Eigen::Quaterniond q(p.rotation[0], p.rotation[1], p.rotation[2], p.rotation[3]);
    const Mat3 r = q.normalized().toRotationMatrix();
    const Vec3 local = r.transpose() * (x - p.center);
    const Vec3 z = local.cwiseQuotient(p.scales);
    return p.density * std::exp(-0.5 * z.squaredNorm());
}

/// Adaptive Simpson quadrature on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int depth = 50) {
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid);
            const double rm = 0.5 * (mid + hi);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
            const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
                return left + right + (left + right - whole) / 15.0;
            return rec(lo, mid, flo, flm, fmid, left, 0.5 * eps, d - 1) +
                   rec(mid, hi, fmid, frm, fhi, right, 0.5 * eps, d - 1);
        };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return rec(a, b, fa, fm, fb, whole, tol, depth);
}

/// Line integral of one primitive along origin + t * dir by splitting the
/// line into pieces around the point of closest approach.
inline double quadrature_line_integral(const GaussianPrimitive& p, const Vec3& origin, const Vec3& dir) {
    const double tc = (p.center - origin).dot(dir);
    const double reach = 12.0 * p.scales.maxCoeff();
    auto f = [&](double t) { return gaussian_value(p, origin + t * dir); };
    double total = 0.0;
    const int pieces = 8;
    for (int i = 0; i < pieces; ++i) {
        const double a = tc - reach + 2.0 * reach * i / pieces;
        const double b = a + 2.0 * reach / pieces;
        total += adaptive_simpson(f, a, b, 1e-14 * p.density);
    }
    return total;
}

/// Squared Mahalanobis distance from the primitive center to the closest point of the line.
inline double line_mahalanobis2(const GaussianPrimitive& p, const Vec3& origin, const Vec3& dir) {
    const Eigen::Quaterniond q(p.rotation[0], p.rotation[1], p.rotation[2], p.rotation[3]);
    const Mat3 r = q.normalized().toRotationMatrix();
    // Whitened coordinates: the line becomes o' + t d' and the distance is Euclidean.
    const Vec3 o = (r.transpose() * (origin - p.center)).cwiseQuotient(p.scales);
    const Vec3 d = (r.transpose() * dir).cwiseQuotient(p.scales);
    const Vec3 perp = o - (o.dot(d) / d.squaredNorm()) * d;
    return perp.squaredNorm();
}

inline double rel_err(double a, double b, double floor = 1e-300) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace rgs::ref
