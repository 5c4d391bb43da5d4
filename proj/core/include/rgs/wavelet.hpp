#pragma once

#include "rgs/types.hpp"

#include <vector>

namespace rgs {

/// Orthonormal two-channel analysis filter pair applied with periodic boundary.
struct FilterPair {
    std::vector<double> low;
    std::vector<double> high;

    /// low = [1, 1]/√2, high = [1, -1]/√2.
    static FilterPair haar();
};

/// Single-level sub-bands, each (rows/2) x (cols/2).
/// lh: low along u, high along v. hl: high along u, low along v.
struct WaveletBands {
    Image2D lf;
    Image2D lh;
    Image2D hl;
    Image2D hh;
};

/// Non-negative high-frequency energy |lh| + |hl| + |hh|.
struct EnergyMap {
    Image2D values;
};

/// Separable transform, rows first (along u) then columns (along v).
/// Throws std::invalid_argument naming the odd axis.
WaveletBands dwt2(const Image2D& image, const FilterPair& filters = FilterPair::haar());

/// Exact inverse of dwt2 for orthonormal filters.
Image2D idwt2(const WaveletBands& bands, const FilterPair& filters = FilterPair::haar());

/// idwt2 of (lf, 0, 0, 0): full-resolution low-pass image.
Image2D lowpass_projection(const Image2D& image, const FilterPair& filters = FilterPair::haar());

EnergyMap energy_map(const WaveletBands& bands);

/// Nearest-neighbour 2x upsampling back to detector resolution.
Image2D upsample_nearest2x(const Image2D& image);

}  // namespace rgs
