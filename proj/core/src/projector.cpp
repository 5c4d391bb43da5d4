#include "rgs/projector.hpp"

#include "rgs/parallel.hpp"
#include "kernel_rows.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rgs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// dR/dq for the polynomial rotation formula, contracted with an upstream
// gradient gr = dL/dR. q = (w, x, y, z) is assumed to be unit length.
Vec4 rotation_vjp(const Vec4& q, const Mat3& gr) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 g = Vec4::Zero();
    // row 0
    g += gr(0, 0) * Vec4(0.0, 0.0, -4.0 * y, -4.0 * z);
    g += gr(0, 1) * Vec4(-2.0 * z, 2.0 * y, 2.0 * x, -2.0 * w);
    g += gr(0, 2) * Vec4(2.0 * y, 2.0 * z, 2.0 * w, 2.0 * x);
    // row 1
    g += gr(1, 0) * Vec4(2.0 * z, 2.0 * y, 2.0 * x, 2.0 * w);
    g += gr(1, 1) * Vec4(0.0, -4.0 * x, 0.0, -4.0 * z);
    g += gr(1, 2) * Vec4(-2.0 * x, -2.0 * w, 2.0 * z, 2.0 * y);
    // row 2
    g += gr(2, 0) * Vec4(-2.0 * y, 2.0 * z, -2.0 * w, 2.0 * x);
    g += gr(2, 1) * Vec4(2.0 * x, 2.0 * w, 2.0 * z, 2.0 * y);
    g += gr(2, 2) * Vec4(0.0, -4.0 * x, -4.0 * y, 0.0);
    return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// ProjectionStack / ParameterGradients
// ---------------------------------------------------------------------------

ProjectionStack ProjectionStack::zeros(const ConeBeamGeometry& geom) {
    ProjectionStack s;
    s.geometry = geom;
    s.views.assign(geom.views(), Image2D(geom.detector_rows, geom.detector_cols));
    return s;
}

std::size_t ProjectionStack::pixel_count() const {
    std::size_t n = 0;
    for (const auto& v : views) n += v.size();
    return n;
}

void ProjectionStack::validate_shape() const {
    geometry.validate();
    if (views.size() != geometry.views())
        throw std::invalid_argument("projection stack: view count " + std::to_string(views.size()) +
                                    " does not match geometry (" +
                                    std::to_string(geometry.views()) + ")");
    for (std::size_t i = 0; i < views.size(); ++i) {
        const Image2D& img = views[i];
        if (img.rows != geometry.detector_rows || img.cols != geometry.detector_cols ||
            img.data.size() != img.rows * img.cols)
            throw std::invalid_argument("projection stack: view " + std::to_string(i) +
                                        " shape does not match the detector");
        for (double x : img.data)
            if (!std::isfinite(x))
                throw std::invalid_argument("projection stack: view " + std::to_string(i) +
                                            " has a non-finite value");
    }
}

void ProjectionStack::validate() const {
    validate_shape();
    for (std::size_t i = 0; i < views.size(); ++i)
        for (double x : views[i].data)
            if (x < 0.0)
                throw std::invalid_argument("projection stack: view " + std::to_string(i) +
                                            " has a negative value");
}

void ParameterGradients::resize(std::size_t n) {
    center.assign(n, Vec3::Zero());
    scales.assign(n, Vec3::Zero());
    rotation.assign(n, Vec4::Zero());
    density.assign(n, 0.0);
    hits.assign(n, 0);
}

bool ParameterGradients::all_finite() const {
    for (std::size_t i = 0; i < size(); ++i)
        if (!center[i].allFinite() || !scales[i].allFinite() || !rotation[i].allFinite() ||
            !std::isfinite(density[i]))
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// Single-ray closed form
// ---------------------------------------------------------------------------

namespace {

// Whitening transform L with Q = L^T L.
Mat3 whitening_of(const GaussianPrimitive& p) {
    return p.scales.cwiseInverse().asDiagonal() * rotation_matrix(p.rotation).transpose();
}

// Returns the unit-density line integral, or 0 when culled. The squared
// distance is |o' x d'|^2 / |d'|^2 in whitened coordinates; the expanded
// form c - b^2 / a cancels badly for distant ray origins.
double kernel(const Mat3& whiten, const Vec3& center, const Ray& ray, double cut2) {
    const Vec3 o = whiten * (ray.origin - center);
    const Vec3 d = whiten * ray.direction;
    const double a = d.squaredNorm();
    const double m2 = o.cross(d).squaredNorm() / a;
    if (m2 > cut2) return 0.0;
    return std::sqrt(kTwoPi / a) * std::exp(-0.5 * m2);
}

}  // namespace

double primitive_line_integral(const GaussianPrimitive& p, const Ray& ray, double cutoff) {
    precision_of(p);
    return kernel(whitening_of(p), p.center, ray, cutoff * cutoff);
}

double project_ray(const GaussianSet& set, const Ray& ray, double cutoff) {
    if (!(cutoff > 0.0)) throw std::invalid_argument("project_ray: cutoff must be positive");
    const double cut2 = cutoff * cutoff;
    double sum = 0.0;
    for (std::size_t n = 0; n < set.size(); ++n) {
        const GaussianPrimitive& p = set.primitives[n];
        precision_of(p, n);
        sum += p.density * kernel(whitening_of(p), p.center, ray, cut2);
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Projector
// ---------------------------------------------------------------------------

struct Projector::Prepared {
    // Upper triangle of the precision matrix.
    double q00, q01, q02, q11, q12, q22;
    Mat3 precision;
    Mat3 rotation;
    Mat3 whiten;
    Vec3 center;
    Vec3 half_extent;
    double support_radius;  // cutoff times the largest scale
    double density;
};

struct Projector::PixelRect {
    std::size_t u0 = 0, u1 = 0, v0 = 0, v1 = 0;  // inclusive
    bool empty = true;
};

Projector::Projector(ConeBeamGeometry geom, double cutoff) : geom_(std::move(geom)), cutoff_(cutoff) {
    geom_.validate();
    if (!(cutoff_ > 0.0)) throw std::invalid_argument("projector: cutoff must be positive");
    const std::size_t nv = geom_.views();
    const std::size_t rows = geom_.detector_rows, cols = geom_.detector_cols;
    frames_.resize(nv);
    dir_x_.assign(nv, std::vector<double>(rows * cols));
    dir_y_.assign(nv, std::vector<double>(rows * cols));
    dir_z_.assign(nv, std::vector<double>(rows * cols));
    for (std::size_t view = 0; view < nv; ++view) {
        const ViewFrame f = view_frame(geom_, view);
        frames_[view] = f;
        for (std::size_t v = 0; v < rows; ++v) {
            const double vmm = detector_v_mm(geom_, static_cast<double>(v));
            for (std::size_t u = 0; u < cols; ++u) {
                const double umm = detector_u_mm(geom_, static_cast<double>(u));
                const Vec3 d = (f.detector_center + umm * f.eu + vmm * f.ev - f.source).normalized();
                dir_x_[view][v * cols + u] = d.x();
                dir_y_[view][v * cols + u] = d.y();
                dir_z_[view][v * cols + u] = d.z();
            }
        }
    }
}

std::vector<Projector::Prepared> Projector::prepare(const GaussianSet& set) const {
    std::vector<Prepared> out(set.size());
    for (std::size_t n = 0; n < set.size(); ++n) {
        const GaussianPrimitive& p = set.primitives[n];
        Prepared& q = out[n];
        q.precision = precision_of(p, n);
        if (!q.precision.allFinite())
            throw NumericalError("degenerate covariance for primitive " + std::to_string(n));
        q.q00 = q.precision(0, 0);
        q.q01 = q.precision(0, 1);
        q.q02 = q.precision(0, 2);
        q.q11 = q.precision(1, 1);
        q.q12 = q.precision(1, 2);
        q.q22 = q.precision(2, 2);
        q.rotation = rotation_matrix(p.rotation);
        q.whiten = p.scales.cwiseInverse().asDiagonal() * q.rotation.transpose();
        q.center = p.center;
        q.density = p.density;
        q.support_radius = cutoff_ * p.scales.maxCoeff();
        q.half_extent = std::isfinite(cutoff_) ? support_half_extent(covariance_of(p), cutoff_)
                                               : Vec3::Constant(kNoCutoff);
    }
    return out;
}

Projector::PixelRect Projector::footprint(const Prepared& p, std::size_t view) const {
    PixelRect r;
    const std::size_t rows = geom_.detector_rows, cols = geom_.detector_cols;
    auto full = [&] {
        PixelRect f;
        f.u0 = 0;
        f.u1 = cols - 1;
        f.v0 = 0;
        f.v1 = rows - 1;
        f.empty = false;
        return f;
    };
    if (!p.half_extent.allFinite()) return full();

    const ViewFrame& f = frames_[view];
    double umin = kNoCutoff, umax = -kNoCutoff, vmin = kNoCutoff, vmax = -kNoCutoff;
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 sign((corner & 1) ? 1.0 : -1.0, (corner & 2) ? 1.0 : -1.0,
                        (corner & 4) ? 1.0 : -1.0);
        const Vec3 rel = p.center + sign.cwiseProduct(p.half_extent) - f.source;
        const double depth = rel.dot(f.axis);
        if (!(depth > 0.0)) return full();
        const double scale = geom_.sdd / depth;
        const double u = (rel.dot(f.eu) * scale - geom_.detector_offset_u) / geom_.pixel_pitch_u;
        const double v = (rel.dot(f.ev) * scale - geom_.detector_offset_v) / geom_.pixel_pitch_v;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    const double uc = 0.5 * static_cast<double>(cols - 1);
    const double vc = 0.5 * static_cast<double>(rows - 1);
    const double u0 = std::ceil(umin + uc), u1 = std::floor(umax + uc);
    const double v0 = std::ceil(vmin + vc), v1 = std::floor(vmax + vc);
    if (u1 < 0.0 || v1 < 0.0 || u0 > static_cast<double>(cols - 1) ||
        v0 > static_cast<double>(rows - 1) || u0 > u1 || v0 > v1)
        return r;
    r.u0 = static_cast<std::size_t>(std::max(u0, 0.0));
    r.u1 = static_cast<std::size_t>(std::min(u1, static_cast<double>(cols - 1)));
    r.v0 = static_cast<std::size_t>(std::max(v0, 0.0));
    r.v1 = static_cast<std::size_t>(std::min(v1, static_cast<double>(rows - 1)));
    r.empty = false;
    return r;
}

template <typename Fn>
void Projector::for_each_span(const Prepared& p, std::size_t view, Fn&& fn) const {
    const ViewFrame& f = frames_[view];
    const std::size_t rows = geom_.detector_rows, cols = geom_.detector_cols;
    auto rect_spans = [&] {
        const PixelRect rect = footprint(p, view);
        if (rect.empty) return;
        for (std::size_t v = rect.v0; v <= rect.v1; ++v) fn(v, rect.u0, rect.u1);
    };
    const Vec3 delta = f.source - p.center;
    const Vec3 w = p.precision * delta;
    const double slack = delta.dot(w) - cutoff_ * cutoff_;
    const double depth = -delta.dot(f.axis);
    if (!std::isfinite(cutoff_) || !(slack > 0.0) || !(depth > p.support_radius)) return rect_spans();

    // Rays through the cutoff ellipsoid satisfy d^T M d <= 0 with
    // M = slack * Q - w w^T, where d = g + t ev + u e runs over the panel
    // (t = v in mm, e = one pixel step along u). For fixed t the condition is
    // a quadratic in u; its discriminant is a quadratic in t.
    const Mat3 m = slack * p.precision - w * w.transpose();
    const Vec3 e = geom_.pixel_pitch_u * f.eu;
    const double uc = 0.5 * static_cast<double>(cols - 1);
    const Vec3 g = f.detector_center - f.source + (geom_.detector_offset_u - uc * geom_.pixel_pitch_u) * f.eu;
    const Vec3 me = m * e, mg = m * g, mv = m * f.ev;
    const double alpha = e.dot(me);
    if (!(alpha > 0.0)) return rect_spans();
    const double p0 = g.dot(me), p1 = f.ev.dot(me);
    const double g0 = g.dot(mg), g1 = g.dot(mv), g2 = f.ev.dot(mv);
    // disc/4 = k2 t^2 + 2 k1 t + k0
    const double k2 = p1 * p1 - alpha * g2, k1 = p0 * p1 - alpha * g1, k0 = p0 * p0 - alpha * g0;
    if (!(k2 < 0.0)) return rect_spans();
    const double dt = k1 * k1 - k2 * k0;
    if (dt < 0.0) return;
    const double root_t = std::sqrt(dt);
    const double t_lo = (-k1 + root_t) / k2, t_hi = (-k1 - root_t) / k2;
    const double vc = 0.5 * static_cast<double>(rows - 1);
    const double to_v = 1.0 / geom_.pixel_pitch_v;
    // One pixel of padding on every bound; the per-pixel test decides membership.
    const double v_lo = std::max(std::floor((t_lo - geom_.detector_offset_v) * to_v + vc) - 1.0, 0.0);
    const double v_hi = std::min(std::ceil((t_hi - geom_.detector_offset_v) * to_v + vc) + 1.0,
                                 static_cast<double>(rows - 1));
    if (v_lo > v_hi) return;
    const double max_u = static_cast<double>(cols - 1);
    for (auto v = static_cast<std::size_t>(v_lo); v <= static_cast<std::size_t>(v_hi); ++v) {
        const double t = detector_v_mm(geom_, static_cast<double>(v));
        const double disc = (k2 * t + 2.0 * k1) * t + k0;
        if (disc < 0.0) continue;
        const double root = std::sqrt(disc);
        const double pb = p0 + p1 * t;  // beta / 2
        const double lo = std::max(std::floor((-pb - root) / alpha) - 1.0, 0.0);
        const double hi = std::min(std::ceil((-pb + root) / alpha) + 1.0, max_u);
        if (lo > hi) continue;
        fn(v, static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
    }
}

detail::KernelCoeffs Projector::coeffs(const Prepared& p, const Vec3& source) const {
    const Vec3 delta = source - p.center;
    const Vec3 w = p.precision * delta;
    // Rows of [o']_x L, so that o' x d' = M d.
    const Vec3 o = p.whiten * delta;
    Mat3 cross;
    cross << 0.0, -o.z(), o.y(), o.z(), 0.0, -o.x(), -o.y(), o.x(), 0.0;
    const Mat3 m = cross * p.whiten;
    return detail::KernelCoeffs{p.q00,   p.q01,   p.q02,   p.q11,   p.q12,   p.q22,   w.x(),
                                w.y(),   w.z(),   m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1),
                                m(1, 2), m(2, 0), m(2, 1), m(2, 2), cutoff_ * cutoff_};
}

void Projector::render_into(const std::vector<Prepared>& prims, std::size_t view,
                            Image2D& out) const {
    const std::size_t cols = geom_.detector_cols;
    const Vec3 src = frames_[view].source;
    const double* dx = dir_x_[view].data();
    const double* dy = dir_y_[view].data();
    const double* dz = dir_z_[view].data();
    double* img = out.data.data();

    for (const Prepared& p : prims) {
        if (p.density == 0.0) continue;
        const detail::KernelCoeffs kc = coeffs(p, src);
        for_each_span(p, view, [&](std::size_t v, std::size_t u0, std::size_t u1) {
            const std::size_t i = v * cols + u0;
            detail::accumulate_row(kc, dx + i, dy + i, dz + i, u1 - u0 + 1, p.density, img + i);
        });
    }
}

Image2D Projector::render_view(const GaussianSet& set, std::size_t view) const {
    if (view >= geom_.views()) throw std::out_of_range("render_view: view index out of range");
    const auto prims = prepare(set);
    Image2D out(geom_.detector_rows, geom_.detector_cols);
    render_into(prims, view, out);
    return out;
}

ProjectionStack Projector::render(const GaussianSet& set) const {
    const auto prims = prepare(set);
    ProjectionStack out = ProjectionStack::zeros(geom_);
    parallel_for(geom_.views(), [&](std::size_t view) { render_into(prims, view, out.views[view]); });
    return out;
}

void Projector::backward_primitive(const Prepared& p, const GaussianPrimitive& prim,
                                   const std::vector<std::size_t>& views,
                                   const std::vector<const Image2D*>& residuals,
                                   ParameterGradients& g, std::size_t index) const {
    const std::size_t cols = geom_.detector_cols;

    double grad_density = 0.0;
    Mat3 grad_precision = Mat3::Zero();  // dL/dΣ^-1, symmetric
    Vec3 sum_e = Vec3::Zero();           // Σ weight * (Δ - (B/A) d)
    std::uint32_t hits = 0;

    for (std::size_t k = 0; k < views.size(); ++k) {
        const std::size_t view = views[k];
        const double* res = residuals[k]->data.data();
        const double* dx = dir_x_[view].data();
        const double* dy = dir_y_[view].data();
        const double* dz = dir_z_[view].data();
        const Vec3 delta = frames_[view].source - p.center;
        const detail::KernelCoeffs kc = coeffs(p, frames_[view].source);
        detail::GradSums acc;
        for_each_span(p, view, [&](std::size_t v, std::size_t u0, std::size_t u1) {
            const std::size_t i = v * cols + u0;
            detail::gradient_row(kc, dx + i, dy + i, dz + i, res + i, u1 - u0 + 1, p.density, acc);
        });
        grad_density += acc.density;
        const bool touched = acc.touched;
        const double sw = acc.sw;
        const double sbx = acc.sb[0], sby = acc.sb[1], sbz = acc.sb[2];
        const double sxx = acc.dd[0], sxy = acc.dd[1], sxz = acc.dd[2];
        const double syy = acc.dd[3], syz = acc.dd[4], szz = acc.dd[5];
        if (touched) ++hits;
        const Vec3 sb(sbx, sby, sbz);
        Mat3 dd;
        dd << sxx, sxy, sxz, sxy, syy, syz, sxz, syz, szz;
        const Mat3 cross = sb * delta.transpose();
        grad_precision += dd + 0.5 * (cross + cross.transpose()) - 0.5 * sw * delta * delta.transpose();
        sum_e += sw * delta - sb;
    }

    g.density[index] = grad_density;
    g.hits[index] = hits;
    g.center[index] = p.precision * sum_e;

    // Σ^-1 = R D R^T with D = diag(1/s^2).
    const Vec3 s = prim.scales;
    const Vec3 inv_sq = s.array().square().inverse();
    for (int a = 0; a < 3; ++a) {
        const Vec3 col = p.rotation.col(a);
        g.scales[index][a] = -2.0 / (s[a] * s[a] * s[a]) * col.dot(grad_precision * col);
    }
    const Mat3 grad_r = 2.0 * grad_precision * p.rotation * inv_sq.asDiagonal();
    const double qnorm = prim.rotation.norm();
    const Vec4 qhat = prim.rotation / qnorm;
    const Vec4 raw = rotation_vjp(qhat, grad_r);
    g.rotation[index] = (raw - raw.dot(qhat) * qhat) / qnorm;
}

ParameterGradients Projector::backward_impl(const GaussianSet& set,
                                            const std::vector<std::size_t>& views,
                                            const std::vector<const Image2D*>& residuals) const {
    for (const Image2D* r : residuals)
        if (r->rows != geom_.detector_rows || r->cols != geom_.detector_cols ||
            r->data.size() != r->rows * r->cols)
            throw std::invalid_argument("backward: residual shape does not match the detector");
    const auto prims = prepare(set);
    ParameterGradients g(set.size());
    parallel_for(set.size(), [&](std::size_t n) {
        backward_primitive(prims[n], set.primitives[n], views, residuals, g, n);
    });
    return g;
}

ParameterGradients Projector::backward_view(const GaussianSet& set, std::size_t view,
                                            const Image2D& residual) const {
    if (view >= geom_.views()) throw std::out_of_range("backward: view index out of range");
    return backward_impl(set, {view}, {&residual});
}

ParameterGradients Projector::backward(const GaussianSet& set,
                                       const std::vector<Image2D>& residuals) const {
    if (residuals.size() != geom_.views())
        throw std::invalid_argument("backward: expected one residual image per view");
    std::vector<std::size_t> views(residuals.size());
    std::vector<const Image2D*> ptrs(residuals.size());
    for (std::size_t v = 0; v < residuals.size(); ++v) {
        views[v] = v;
        ptrs[v] = &residuals[v];
    }
    return backward_impl(set, views, ptrs);
}

// ---------------------------------------------------------------------------
// Free-function conveniences
// ---------------------------------------------------------------------------

namespace {

ConeBeamGeometry single_view(const ConeBeamGeometry& geom, std::size_t view_index) {
    if (view_index >= geom.views()) throw std::out_of_range("view index out of range");
    ConeBeamGeometry g = geom;
    g.angles = {geom.angles[view_index]};
    return g;
}

}  // namespace

Image2D render_view(const GaussianSet& set, const ConeBeamGeometry& geom, std::size_t view_index,
                    double cutoff) {
    return Projector(single_view(geom, view_index), cutoff).render_view(set, 0);
}

RenderSum render_sum(const GaussianSet& base, const GaussianSet& detail,
                     const ConeBeamGeometry& geom, std::size_t view_index, double cutoff) {
    const Projector proj(single_view(geom, view_index), cutoff);
    RenderSum out;
    out.base = proj.render_view(base, 0);
    out.detail = proj.render_view(detail, 0);
    out.total = out.base;
    for (std::size_t i = 0; i < out.total.size(); ++i) out.total.data[i] += out.detail.data[i];
    return out;
}

ParameterGradients backward(const GaussianSet& set, const ConeBeamGeometry& geom,
                            std::size_t view_index, const Image2D& residual, double cutoff) {
    return Projector(single_view(geom, view_index), cutoff).backward_view(set, 0, residual);
}

}  // namespace rgs
