#pragma once

#include "rgs/field.hpp"

#include <cstdint>

namespace rgs {

struct InitConfig {
    std::size_t n_base = 50000;
    std::size_t n_detail = 30000;
    double tau_air = 0.05;  ///< air threshold as a fraction of max(V_LF)
    double k = 0.05;        ///< fraction of voxels kept as high-saliency candidates
    /// Detail density relative to the peak base density.
    double detail_initial_density = 0.01;
    /// Multiplier from V_LF value to base density. The default makes a lattice
    /// of isotropic primitives at spacing s_base reproduce V_LF on average.
    double base_density_scale = 0.0634936359342410;  // (2π)^(-3/2)
    std::uint64_t seed = 0;

    void validate() const;
};

struct BaseInit {
    GaussianSet set;
    double base_scale = 0.0;       ///< isotropic scale s_base in mm
    std::size_t candidates = 0;    ///< voxels above the air threshold
    std::size_t shortfall = 0;     ///< n_base minus primitives placed
};

/// Density-thresholded initialization from the low-frequency volume.
/// Throws std::runtime_error when no voxel exceeds the air threshold.
BaseInit init_base(const VoxelVolume& v_lf, const InitConfig& cfg);

/// Saliency-guided initialization from the top ⌈k M⌉ voxels of `v_sal`.
/// `reference_density` is the peak base density; detail densities start at
/// detail_initial_density times it. Throws std::runtime_error for all-zero saliency.
GaussianSet init_detail(const VoxelVolume& v_sal, const InitConfig& cfg, double base_scale,
                        double reference_density);

/// Voxel indices of the top ⌈k M⌉ saliency values, ties broken by ascending index.
std::vector<std::size_t> top_fraction_indices(const VoxelVolume& v, double k);

}  // namespace rgs
