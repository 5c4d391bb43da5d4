#include "rgs/metrics.hpp"

#include "rgs/parallel.hpp"
#include "fftw_lock.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace rgs {

namespace {

void require_same_grid(const VoxelVolume& a, const VoxelVolume& b, const char* what) {
    if (a.grid.dims != b.grid.dims || a.values.size() != b.values.size())
        throw std::invalid_argument(std::string(what) + ": volume dimensions differ");
}

double gt_range(const VoxelVolume& gt, const char* what) {
    const double range = gt.max_value() - gt.min_value();
    if (!(range > 0.0)) throw std::invalid_argument(std::string(what) + ": ground truth is constant");
    return range;
}

}  // namespace

double psnr(const VoxelVolume& rec, const VoxelVolume& gt) {
    require_same_grid(rec, gt, "psnr");
    const double range = gt_range(gt, "psnr");
    double sse = 0.0;
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        const double e = rec.values[i] - gt.values[i];
        sse += e * e;
    }
    const double mse = sse / static_cast<double>(gt.values.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(range * range / mse));
}

double ssim_2d(const Image2D& rec, const Image2D& gt, double range) {
    if (!rec.same_shape(gt)) throw std::invalid_argument("ssim: image shapes differ");
    if (gt.rows < kSsimWindow || gt.cols < kSsimWindow)
        throw std::invalid_argument("ssim: image smaller than the 7x7 window");
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    const double inv = 1.0 / static_cast<double>(kSsimWindow * kSsimWindow);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t r0 = 0; r0 + kSsimWindow <= gt.rows; ++r0) {
        for (std::size_t c0 = 0; c0 + kSsimWindow <= gt.cols; ++c0) {
            double mx = 0.0, my = 0.0;
            for (std::size_t r = r0; r < r0 + kSsimWindow; ++r)
                for (std::size_t c = c0; c < c0 + kSsimWindow; ++c) {
                    mx += rec(r, c);
                    my += gt(r, c);
                }
            mx *= inv;
            my *= inv;
            double sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (std::size_t r = r0; r < r0 + kSsimWindow; ++r)
                for (std::size_t c = c0; c < c0 + kSsimWindow; ++c) {
                    const double dx = rec(r, c) - mx;
                    const double dy = gt(r, c) - my;
                    sxx += dx * dx;
                    syy += dy * dy;
                    sxy += dx * dy;
                }
            sxx *= inv;
            syy *= inv;
            sxy *= inv;
            total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) /
                     ((mx * mx + my * my + c1) * (sxx + syy + c2));
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

Image2D axial_slice(const VoxelVolume& v, std::size_t k) {
    if (k >= v.grid.dims[2]) throw std::out_of_range("axial_slice: slice index out of range");
    Image2D out(v.grid.dims[1], v.grid.dims[0]);
    for (std::size_t j = 0; j < v.grid.dims[1]; ++j)
        for (std::size_t i = 0; i < v.grid.dims[0]; ++i) out(j, i) = v.at(i, j, k);
    return out;
}

Image2D central_axial_slice(const VoxelVolume& v) { return axial_slice(v, v.grid.dims[2] / 2); }

double ssim(const VoxelVolume& rec, const VoxelVolume& gt) {
    require_same_grid(rec, gt, "ssim");
    if (gt.grid.dims[0] < kSsimWindow || gt.grid.dims[1] < kSsimWindow)
        throw std::invalid_argument("ssim: slices smaller than the 7x7 window");
    const double range = gt_range(gt, "ssim");
    const std::size_t nz = gt.grid.dims[2];
    std::vector<double> per_slice(nz);
    parallel_for(nz, [&](std::size_t k) {
        per_slice[k] = ssim_2d(axial_slice(rec, k), axial_slice(gt, k), range);
    });
    double sum = 0.0;
    for (double s : per_slice) sum += s;
    return sum / static_cast<double>(nz);
}

SpectrumProfile radial_spectrum(const Image2D& slice, std::size_t n_bins) {
    if (slice.rows != slice.cols || slice.rows == 0)
        throw std::invalid_argument("radial_spectrum: slice must be square and non-empty");
    if (n_bins < 1) throw std::invalid_argument("radial_spectrum: need at least one bin");
    const std::size_t n = slice.rows;
    const std::size_t total = n * n;

    std::vector<std::complex<double>> buf(total);
    for (std::size_t i = 0; i < total; ++i) buf[i] = slice.data[i];
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        auto* data = reinterpret_cast<fftw_complex*>(buf.data());
        fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), data, data,
                                          FFTW_FORWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    SpectrumProfile out;
    out.radial_bins.resize(n_bins);
    out.power.assign(n_bins, 0.0);
    out.counts.assign(n_bins, 0);
    const double width = 0.5 / static_cast<double>(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) out.radial_bins[b] = (static_cast<double>(b) + 0.5) * width;

    auto signed_freq = [n](std::size_t k) {
        const double kk = (k <= n / 2) ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
        return kk / static_cast<double>(n);
    };
    for (std::size_t r = 0; r < n; ++r) {
        const double fy = signed_freq(r);
        for (std::size_t c = 0; c < n; ++c) {
            const double fx = signed_freq(c);
            const double f = std::hypot(fx, fy);
            const auto bin = std::min(n_bins - 1, static_cast<std::size_t>(f / width));
            out.power[bin] += std::norm(buf[r * n + c]) / static_cast<double>(total);
            ++out.counts[bin];
        }
    }
    for (std::size_t b = 0; b < n_bins; ++b)
        if (out.counts[b]) out.power[b] /= static_cast<double>(out.counts[b]);
    return out;
}

SpectrumProfile spectrum_relative_error(const SpectrumProfile& rec, const SpectrumProfile& gt) {
    if (rec.power.size() != gt.power.size())
        throw std::invalid_argument("spectrum_relative_error: bin counts differ");
    SpectrumProfile out = rec;
    out.relative_error.resize(rec.power.size());
    for (std::size_t b = 0; b < rec.power.size(); ++b) {
        const double diff = std::abs(rec.power[b] - gt.power[b]);
        if (gt.power[b] > 0.0) out.relative_error[b] = diff / gt.power[b];
        else out.relative_error[b] = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return out;
}

double upper_band_error(const SpectrumProfile& profile) {
    const std::size_t n = profile.relative_error.size();
    if (n == 0) throw std::invalid_argument("upper_band_error: relative errors not computed");
    double sum = 0.0;
    for (std::size_t b = n / 2; b < n; ++b) sum += profile.relative_error[b];
    return sum / static_cast<double>(n - n / 2);
}

BandErrorCurve band_error_curve(const std::vector<SliceCheckpoint>& checkpoints, const Image2D& gt,
                                std::size_t n_bins) {
    if (checkpoints.empty()) throw std::invalid_argument("band_error_curve: no checkpoints");
    const SpectrumProfile ref = radial_spectrum(gt, n_bins);
    BandErrorCurve out;
    out.radial_bins = ref.radial_bins;
    for (const SliceCheckpoint& cp : checkpoints) {
        if (!cp.slice.same_shape(gt))
            throw std::invalid_argument("band_error_curve: checkpoint slice shape differs from gt");
        out.iterations.push_back(cp.iteration);
        out.relative_error.push_back(
            spectrum_relative_error(radial_spectrum(cp.slice, n_bins), ref).relative_error);
    }
    return out;
}

std::string spectrum_csv(const SpectrumProfile& rec, const SpectrumProfile& gt) {
    const SpectrumProfile rel = spectrum_relative_error(rec, gt);
    std::ostringstream os;
    os.precision(10);
    os << "bin,frequency,power_rec,power_gt,rel_err\n";
    for (std::size_t b = 0; b < rel.power.size(); ++b)
        os << b << ',' << rel.radial_bins[b] << ',' << rec.power[b] << ',' << gt.power[b] << ','
           << rel.relative_error[b] << '\n';
    return os.str();
}

std::string band_error_csv(const BandErrorCurve& curve) {
    std::ostringstream os;
    os.precision(10);
    os << "iteration,bin,rel_err\n";
    for (std::size_t c = 0; c < curve.iterations.size(); ++c)
        for (std::size_t b = 0; b < curve.relative_error[c].size(); ++b)
            os << curve.iterations[c] << ',' << b << ',' << curve.relative_error[c][b] << '\n';
    return os.str();
}

}  // namespace rgs
