#pragma once

#include "rgs/field.hpp"
#include "rgs/projector.hpp"
#include "rgs/wavelet.hpp"

#include <vector>

namespace rgs {

enum class RampKind { ram_lak, hann };

/// Frequency response of the row-wise ramp filter, sampled on the
/// zero-padded FFT grid (next power of two >= 2 * cols).
class RampFilter {
public:
    /// `sample_spacing` is the detector pitch, in mm, at which rows are filtered.
    RampFilter(RampKind kind, std::size_t cols, double sample_spacing);

    RampKind kind() const { return kind_; }
    std::size_t padded_size() const { return padded_; }
    /// One value per non-negative frequency bin, 0 .. padded/2 (1/mm).
    const std::vector<double>& response() const { return response_; }

    /// Filters one detector row in place.
    void apply(std::vector<double>& row) const;

private:
    RampKind kind_;
    std::size_t cols_;
    std::size_t padded_;
    std::vector<double> response_;
};

struct ReconResult {
    VoxelVolume volume;
    /// Set when some voxel center projects outside the detector in some view.
    bool outside_fov = false;
};

/// Feldkamp-Davis-Kress reconstruction of a full circular scan. Negative
/// outputs are clamped to zero.
ReconResult fdk(const ProjectionStack& stack, const GridSpec& grid,
                RampKind filter = RampKind::ram_lak);

/// Unfiltered, unweighted voxel-driven backprojection averaged over views.
/// Input images must be non-negative.
VoxelVolume backproject(const ProjectionStack& maps, const GridSpec& grid);

/// Energy maps upsampled to detector resolution and packed as a stack.
ProjectionStack saliency_stack(const std::vector<EnergyMap>& maps, const ConeBeamGeometry& geom);

/// Bilinear sample at continuous pixel coordinates; pixels outside the
/// detector read as zero.
double sample_bilinear(const Image2D& image, double u, double v);

}  // namespace rgs
