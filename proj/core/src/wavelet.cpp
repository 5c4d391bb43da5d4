#include "rgs/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rgs {

FilterPair FilterPair::haar() {
    const double a = 1.0 / std::numbers::sqrt2;
    return FilterPair{{a, a}, {a, -a}};
}

namespace {

// One level along a strided 1D signal of even length n.
void analyze(const double* in, std::size_t n, std::size_t stride, const FilterPair& f,
             double* lo, double* hi, std::size_t out_stride) {
    const std::size_t half = n / 2;
    const std::size_t taps = f.low.size();
    for (std::size_t k = 0; k < half; ++k) {
        double l = 0.0, h = 0.0;
        for (std::size_t j = 0; j < taps; ++j) {
            const double x = in[((2 * k + j) % n) * stride];
            l += f.low[j] * x;
            h += f.high[j] * x;
        }
        lo[k * out_stride] = l;
        hi[k * out_stride] = h;
    }
}

void synthesize(const double* lo, const double* hi, std::size_t half, std::size_t in_stride,
                const FilterPair& f, double* out, std::size_t stride) {
    const std::size_t n = 2 * half;
    const std::size_t taps = f.low.size();
    for (std::size_t i = 0; i < n; ++i) out[i * stride] = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
        const double l = lo[k * in_stride];
        const double h = hi[k * in_stride];
        for (std::size_t j = 0; j < taps; ++j) out[((2 * k + j) % n) * stride] += f.low[j] * l + f.high[j] * h;
    }
}

void check_filters(const FilterPair& f) {
    if (f.low.empty() || f.low.size() != f.high.size() || f.low.size() % 2 != 0)
        throw std::invalid_argument("wavelet: filter pair must have equal, even lengths");
}

}  // namespace

WaveletBands dwt2(const Image2D& image, const FilterPair& filters) {
    check_filters(filters);
    if (image.rows == 0 || image.rows % 2 != 0)
        throw std::invalid_argument("dwt2: row count (v axis) must be even and non-zero");
    if (image.cols == 0 || image.cols % 2 != 0)
        throw std::invalid_argument("dwt2: column count (u axis) must be even and non-zero");

    const std::size_t rows = image.rows, cols = image.cols;
    const std::size_t hr = rows / 2, hc = cols / 2;

    // Along u for every row.
    Image2D low_u(rows, hc), high_u(rows, hc);
    for (std::size_t v = 0; v < rows; ++v)
        analyze(&image.data[v * cols], cols, 1, filters, &low_u.data[v * hc], &high_u.data[v * hc], 1);

    WaveletBands b{Image2D(hr, hc), Image2D(hr, hc), Image2D(hr, hc), Image2D(hr, hc)};
    // Along v for every column of each half.
    for (std::size_t u = 0; u < hc; ++u) {
        analyze(&low_u.data[u], rows, hc, filters, &b.lf.data[u], &b.lh.data[u], hc);
        analyze(&high_u.data[u], rows, hc, filters, &b.hl.data[u], &b.hh.data[u], hc);
    }
    return b;
}

Image2D idwt2(const WaveletBands& b, const FilterPair& filters) {
    check_filters(filters);
    const std::size_t hr = b.lf.rows, hc = b.lf.cols;
    if (!b.lh.same_shape(b.lf) || !b.hl.same_shape(b.lf) || !b.hh.same_shape(b.lf))
        throw std::invalid_argument("idwt2: sub-band shapes differ");
    const std::size_t rows = 2 * hr, cols = 2 * hc;

    Image2D low_u(rows, hc), high_u(rows, hc);
    for (std::size_t u = 0; u < hc; ++u) {
        synthesize(&b.lf.data[u], &b.lh.data[u], hr, hc, filters, &low_u.data[u], hc);
        synthesize(&b.hl.data[u], &b.hh.data[u], hr, hc, filters, &high_u.data[u], hc);
    }
    Image2D out(rows, cols);
    for (std::size_t v = 0; v < rows; ++v)
        synthesize(&low_u.data[v * hc], &high_u.data[v * hc], hc, 1, filters, &out.data[v * cols], 1);
    return out;
}

Image2D lowpass_projection(const Image2D& image, const FilterPair& filters) {
    WaveletBands b = dwt2(image, filters);
    std::fill(b.lh.data.begin(), b.lh.data.end(), 0.0);
    std::fill(b.hl.data.begin(), b.hl.data.end(), 0.0);
    std::fill(b.hh.data.begin(), b.hh.data.end(), 0.0);
    return idwt2(b, filters);
}

EnergyMap energy_map(const WaveletBands& b) {
    if (!b.lh.same_shape(b.hl) || !b.lh.same_shape(b.hh))
        throw std::invalid_argument("energy_map: sub-band shapes differ");
    EnergyMap m{Image2D(b.lh.rows, b.lh.cols)};
    for (std::size_t i = 0; i < m.values.size(); ++i)
        m.values.data[i] = std::abs(b.lh.data[i]) + std::abs(b.hl.data[i]) + std::abs(b.hh.data[i]);
    return m;
}

Image2D upsample_nearest2x(const Image2D& image) {
    Image2D out(2 * image.rows, 2 * image.cols);
    for (std::size_t v = 0; v < out.rows; ++v)
        for (std::size_t u = 0; u < out.cols; ++u) out(v, u) = image(v / 2, u / 2);
    return out;
}

}  // namespace rgs
