#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#if defined(__AVX512F__)
#include <Eigen/Core>
#include <immintrin.h>
#endif

namespace rgs::detail {

// Per-(primitive, view) constants of the line-integral kernel. For a unit ray
// direction d: A = d^T Q d, B = w . d, m2 = |M d|^2 / A, K = sqrt(2π / A) exp(-m2 / 2).
struct KernelCoeffs {
    double q00, q01, q02, q11, q12, q22;
    double wx, wy, wz;
    double m00, m01, m02, m10, m11, m12, m20, m21, m22;
    double cut2;
};

struct GradSums {
    double density = 0.0;  // Σ r K
    double sw = 0.0;       // Σ r σ K
    double sb[3] = {0.0, 0.0, 0.0};                 // Σ r σ K (B/A) d
    double dd[6] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};  // Σ r σ K g_A d d^T, upper triangle
    bool touched = false;
};

inline constexpr double kSqrtTwoPi = 2.5066282746310002;

#if defined(__AVX512F__)

struct Lane {
    __m512d x, y, z, b, r, m2, k0;  // r = 1/sqrt(A)
    __mmask8 inside;
};

inline Lane eval_lanes(const KernelCoeffs& k, const double* dx, const double* dy, const double* dz,
                       __mmask8 valid) {
    Lane l;
    l.x = _mm512_maskz_loadu_pd(valid, dx);
    l.y = _mm512_maskz_loadu_pd(valid, dy);
    l.z = _mm512_maskz_loadu_pd(valid, dz);
    __m512d a = _mm512_mul_pd(_mm512_set1_pd(k.q00), _mm512_mul_pd(l.x, l.x));
    a = _mm512_fmadd_pd(_mm512_set1_pd(k.q11), _mm512_mul_pd(l.y, l.y), a);
    a = _mm512_fmadd_pd(_mm512_set1_pd(k.q22), _mm512_mul_pd(l.z, l.z), a);
    __m512d cross = _mm512_mul_pd(_mm512_set1_pd(k.q01), _mm512_mul_pd(l.x, l.y));
    cross = _mm512_fmadd_pd(_mm512_set1_pd(k.q02), _mm512_mul_pd(l.x, l.z), cross);
    cross = _mm512_fmadd_pd(_mm512_set1_pd(k.q12), _mm512_mul_pd(l.y, l.z), cross);
    a = _mm512_fmadd_pd(_mm512_set1_pd(2.0), cross, a);
    // Padding lanes get A = 1 so they stay finite.
    a = _mm512_mask_blend_pd(valid, _mm512_set1_pd(1.0), a);
    __m512d b = _mm512_mul_pd(_mm512_set1_pd(k.wx), l.x);
    b = _mm512_fmadd_pd(_mm512_set1_pd(k.wy), l.y, b);
    b = _mm512_fmadd_pd(_mm512_set1_pd(k.wz), l.z, b);
    // 1/sqrt(A): 14-bit estimate refined by two Newton steps.
    const __m512d half_a = _mm512_mul_pd(_mm512_set1_pd(0.5), a);
    __m512d r = _mm512_rsqrt14_pd(a);
    for (int it = 0; it < 2; ++it)
        r = _mm512_mul_pd(r, _mm512_fnmadd_pd(half_a, _mm512_mul_pd(r, r), _mm512_set1_pd(1.5)));
    l.r = r;
    l.b = b;
    auto row = [&](double c0, double c1, double c2) {
        __m512d t = _mm512_mul_pd(_mm512_set1_pd(c0), l.x);
        t = _mm512_fmadd_pd(_mm512_set1_pd(c1), l.y, t);
        return _mm512_fmadd_pd(_mm512_set1_pd(c2), l.z, t);
    };
    const __m512d p0 = row(k.m00, k.m01, k.m02);
    const __m512d p1 = row(k.m10, k.m11, k.m12);
    const __m512d p2 = row(k.m20, k.m21, k.m22);
    __m512d perp = _mm512_mul_pd(p0, p0);
    perp = _mm512_fmadd_pd(p1, p1, perp);
    perp = _mm512_fmadd_pd(p2, p2, perp);
    l.m2 = _mm512_mul_pd(perp, _mm512_mul_pd(r, r));
    l.inside = _mm512_mask_cmp_pd_mask(valid, l.m2, _mm512_set1_pd(k.cut2), _CMP_LE_OQ);
    // Lanes outside the cutoff evaluate exp(0); far-field arguments would
    // otherwise underflow into slow denormal arithmetic.
    const __m512d arg = _mm512_maskz_mul_pd(l.inside, _mm512_set1_pd(-0.5), l.m2);
    const __m512d e = Eigen::internal::pexp(arg);
    l.k0 = _mm512_mul_pd(_mm512_mul_pd(_mm512_set1_pd(kSqrtTwoPi), r), e);
    return l;
}

inline __mmask8 lane_mask(std::size_t count) {
    return static_cast<__mmask8>(count >= 8 ? 0xffu : ((1u << count) - 1u));
}

inline void accumulate_row(const KernelCoeffs& k, const double* dx, const double* dy, const double* dz,
                           std::size_t n, double density, double* out) {
    const __m512d dens = _mm512_set1_pd(density);
    for (std::size_t u = 0; u < n; u += 8) {
        const __mmask8 valid = lane_mask(n - u);
        const Lane l = eval_lanes(k, dx + u, dy + u, dz + u, valid);
        if (!l.inside) continue;
        const __m512d cur = _mm512_maskz_loadu_pd(l.inside, out + u);
        _mm512_mask_storeu_pd(out + u, l.inside, _mm512_fmadd_pd(dens, l.k0, cur));
    }
}

inline void gradient_row(const KernelCoeffs& k, const double* dx, const double* dy, const double* dz,
                         const double* res, std::size_t n, double density, GradSums& g) {
    __m512d s_dens = _mm512_setzero_pd(), s_w = _mm512_setzero_pd();
    __m512d s_bx = _mm512_setzero_pd(), s_by = _mm512_setzero_pd(), s_bz = _mm512_setzero_pd();
    __m512d s_xx = _mm512_setzero_pd(), s_xy = _mm512_setzero_pd(), s_xz = _mm512_setzero_pd();
    __m512d s_yy = _mm512_setzero_pd(), s_yz = _mm512_setzero_pd(), s_zz = _mm512_setzero_pd();
    const __m512d dens = _mm512_set1_pd(density);
    bool touched = false;
    for (std::size_t u = 0; u < n; u += 8) {
        const __mmask8 valid = lane_mask(n - u);
        const Lane l = eval_lanes(k, dx + u, dy + u, dz + u, valid);
        if (!l.inside) continue;
        touched = true;
        const __mmask8 m = l.inside;
        const __m512d r = _mm512_maskz_loadu_pd(m, res + u);
        const __m512d rk = _mm512_maskz_mul_pd(m, r, l.k0);
        s_dens = _mm512_add_pd(s_dens, rk);
        const __m512d wt = _mm512_mul_pd(rk, dens);
        const __m512d inv_a = _mm512_mul_pd(l.r, l.r);
        const __m512d g_b = _mm512_mul_pd(l.b, inv_a);
        // g_A = -(1/2A)(1 + B g_B)
        const __m512d g_a = _mm512_mul_pd(_mm512_mul_pd(_mm512_set1_pd(-0.5), inv_a),
                                          _mm512_fmadd_pd(l.b, g_b, _mm512_set1_pd(1.0)));
        s_w = _mm512_add_pd(s_w, wt);
        const __m512d wb = _mm512_mul_pd(wt, g_b);
        s_bx = _mm512_fmadd_pd(wb, l.x, s_bx);
        s_by = _mm512_fmadd_pd(wb, l.y, s_by);
        s_bz = _mm512_fmadd_pd(wb, l.z, s_bz);
        const __m512d wa = _mm512_mul_pd(wt, g_a);
        const __m512d wax = _mm512_mul_pd(wa, l.x), way = _mm512_mul_pd(wa, l.y);
        s_xx = _mm512_fmadd_pd(wax, l.x, s_xx);
        s_xy = _mm512_fmadd_pd(wax, l.y, s_xy);
        s_xz = _mm512_fmadd_pd(wax, l.z, s_xz);
        s_yy = _mm512_fmadd_pd(way, l.y, s_yy);
        s_yz = _mm512_fmadd_pd(way, l.z, s_yz);
        s_zz = _mm512_fmadd_pd(_mm512_mul_pd(wa, l.z), l.z, s_zz);
    }
    if (!touched) return;
    g.touched = true;
    g.density += _mm512_reduce_add_pd(s_dens);
    g.sw += _mm512_reduce_add_pd(s_w);
    g.sb[0] += _mm512_reduce_add_pd(s_bx);
    g.sb[1] += _mm512_reduce_add_pd(s_by);
    g.sb[2] += _mm512_reduce_add_pd(s_bz);
    g.dd[0] += _mm512_reduce_add_pd(s_xx);
    g.dd[1] += _mm512_reduce_add_pd(s_xy);
    g.dd[2] += _mm512_reduce_add_pd(s_xz);
    g.dd[3] += _mm512_reduce_add_pd(s_yy);
    g.dd[4] += _mm512_reduce_add_pd(s_yz);
    g.dd[5] += _mm512_reduce_add_pd(s_zz);
}

#else

struct Scalar {
    double a, b, m2, k0;
};

inline Scalar eval_scalar(const KernelCoeffs& k, double x, double y, double z) {
    Scalar s;
    s.a = k.q00 * x * x + k.q11 * y * y + k.q22 * z * z + 2.0 * (k.q01 * x * y + k.q02 * x * z + k.q12 * y * z);
    s.b = k.wx * x + k.wy * y + k.wz * z;
    const double p0 = k.m00 * x + k.m01 * y + k.m02 * z;
    const double p1 = k.m10 * x + k.m11 * y + k.m12 * z;
    const double p2 = k.m20 * x + k.m21 * y + k.m22 * z;
    s.m2 = (p0 * p0 + p1 * p1 + p2 * p2) / s.a;
    s.k0 = kSqrtTwoPi / std::sqrt(s.a) * std::exp(-0.5 * s.m2);
    return s;
}

inline void accumulate_row(const KernelCoeffs& k, const double* dx, const double* dy, const double* dz,
                           std::size_t n, double density, double* out) {
    for (std::size_t u = 0; u < n; ++u) {
        const Scalar s = eval_scalar(k, dx[u], dy[u], dz[u]);
        if (s.m2 <= k.cut2) out[u] += density * s.k0;
    }
}

inline void gradient_row(const KernelCoeffs& k, const double* dx, const double* dy, const double* dz,
                         const double* res, std::size_t n, double density, GradSums& g) {
    for (std::size_t u = 0; u < n; ++u) {
        const double x = dx[u], y = dy[u], z = dz[u];
        const Scalar s = eval_scalar(k, x, y, z);
        if (!(s.m2 <= k.cut2)) continue;
        g.touched = true;
        const double rk = res[u] * s.k0;
        g.density += rk;
        const double wt = rk * density;
        const double g_b = s.b / s.a;
        const double g_a = -0.5 / s.a * (1.0 + s.b * g_b);
        g.sw += wt;
        const double wb = wt * g_b;
        g.sb[0] += wb * x;
        g.sb[1] += wb * y;
        g.sb[2] += wb * z;
        const double wa = wt * g_a;
        g.dd[0] += wa * x * x;
        g.dd[1] += wa * x * y;
        g.dd[2] += wa * x * z;
        g.dd[3] += wa * y * y;
        g.dd[4] += wa * y * z;
        g.dd[5] += wa * z * z;
    }
}

#endif

}  // namespace rgs::detail
