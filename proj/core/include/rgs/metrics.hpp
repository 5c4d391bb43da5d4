#pragma once

#include "rgs/field.hpp"
#include "rgs/types.hpp"

#include <string>
#include <vector>

namespace rgs {

inline constexpr double kPsnrCap = 200.0;

/// 10 log10(range^2 / MSE) with range = max(gt) - min(gt), capped at kPsnrCap.
/// Throws std::invalid_argument on shape mismatch or constant gt.
double psnr(const VoxelVolume& rec, const VoxelVolume& gt);

/// Mean SSIM over 7x7 uniform windows (valid region) of every axial slice,
/// averaged over slices. Constants use the gt range.
double ssim(const VoxelVolume& rec, const VoxelVolume& gt);

/// SSIM of one 2D image pair with explicit dynamic range.
double ssim_2d(const Image2D& rec, const Image2D& gt, double range);

inline constexpr std::size_t kSsimWindow = 7;

/// Axial slice k (rows = y, cols = x).
Image2D axial_slice(const VoxelVolume& v, std::size_t k);
Image2D central_axial_slice(const VoxelVolume& v);

struct SpectrumProfile {
    std::vector<double> radial_bins;     ///< bin-center frequency, cycles per sample
    std::vector<double> power;           ///< mean |F|^2 / N per bin
    std::vector<std::size_t> counts;     ///< Fourier coefficients per bin
    std::vector<double> relative_error;  ///< filled by spectrum_relative_error
};

/// Radially averaged power spectrum of a square image. Bins split [0, 0.5]
/// evenly; corner frequencies beyond 0.5 fall in the last bin, so
/// sum(power * counts) equals the image energy.
SpectrumProfile radial_spectrum(const Image2D& slice, std::size_t n_bins);

/// Copy of `rec` with relative_error = |rec - gt| / gt per bin (0 when both
/// vanish, +inf when only gt does).
SpectrumProfile spectrum_relative_error(const SpectrumProfile& rec, const SpectrumProfile& gt);

/// Mean relative error over bins with index >= n_bins / 2.
double upper_band_error(const SpectrumProfile& profile);

struct BandErrorCurve {
    std::vector<std::size_t> iterations;
    std::vector<double> radial_bins;
    std::vector<std::vector<double>> relative_error;  ///< [checkpoint][bin]
};

struct SliceCheckpoint {
    std::size_t iteration = 0;
    Image2D slice;
};

/// Throws std::invalid_argument when `checkpoints` is empty.
BandErrorCurve band_error_curve(const std::vector<SliceCheckpoint>& checkpoints, const Image2D& gt,
                                std::size_t n_bins);

std::string spectrum_csv(const SpectrumProfile& rec, const SpectrumProfile& gt);
std::string band_error_csv(const BandErrorCurve& curve);

}  // namespace rgs
