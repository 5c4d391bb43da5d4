#pragma once

#include "rgs/analytic_recon.hpp"
#include "rgs/field.hpp"
#include "rgs/init.hpp"
#include "rgs/optimizer.hpp"
#include "rgs/projector.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace rgs {

/// Invalid configuration value or key. The message starts with the key path.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::string projections;  ///< input stack; the geometry sidecar sits next to it
    std::string output_dir = "out";
    InitConfig init;
    OptimizerConfig optimizer;
    std::array<std::size_t, 3> grid_dims{64, 64, 64};
    Vec3 grid_spacing = Vec3::Constant(0.7);
    RampKind fdk_filter = RampKind::ram_lak;
    /// Base set only, initialized from FDK of the raw projections, n_base +
    /// n_detail primitives, single phase fitting P directly.
    bool disable_wavelet = false;
    /// Both sets optimized jointly from iteration 0.
    bool disable_curriculum = false;
    std::size_t checkpoint_interval = 0;  ///< 0 disables checkpoints

    GridSpec grid() const { return GridSpec::centered(grid_dims, grid_spacing); }
    /// Throws ConfigError naming the key path.
    void validate() const;
};

/// Defaults as a JSON document (every key that load/override accepts).
std::string config_to_json(const RunConfig& cfg);
/// Applies the keys present in `json_text` on top of `cfg`. Unknown keys are errors.
void apply_config_json(RunConfig& cfg, const std::string& json_text, const std::string& source = "config");
/// `key.path=value`, value parsed as JSON (bare words are taken as strings).
void apply_config_override(RunConfig& cfg, const std::string& assignment);

struct ReconstructionResult {
    VoxelVolume volume;
    GaussianSet base;
    GaussianSet detail;
    TrainState state;
    VoxelVolume v_lf;   ///< analytic low-frequency prior
    VoxelVolume v_sal;  ///< backprojected saliency
    double base_scale = 0.0;
    bool outside_fov = false;
};

/// Scene radius used to scale positional rates: half the grid diagonal.
double scene_extent(const GridSpec& grid);

/// Low-pass stack, one idwt2(lf, 0, 0, 0) per view.
ProjectionStack lowpass_stack(const ProjectionStack& p);

/// End-to-end reconstruction: wavelet split, FDK prior, saliency, initialization,
/// two-phase optimization and voxelization. Deterministic for a fixed seed.
ReconstructionResult reconstruct(const ProjectionStack& p, const RunConfig& cfg,
                                 const IterationObserver& observer = {});

}  // namespace rgs
