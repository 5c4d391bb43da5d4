#pragma once

#include "rgs/field.hpp"
#include "rgs/projector.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace rgs {

/// Adaptive density control (split / clone / prune).
struct AdcConfig {
    bool enabled = true;
    std::size_t interval = 500;
    /// Trigger on the interval-mean positional gradient magnitude, measured as
    /// |dL/dc| * scene_extent / mean(P^2).
    double grad_threshold = 2e-4;
    double split_scale_factor = 1.6;
    /// Primitives below this fraction of the set's current max density are pruned.
    double prune_density_fraction = 1e-4;
    /// Clone instead of split when max scale < this fraction of the scene extent.
    double clone_scale_fraction = 0.01;
    std::size_t max_primitives = 200000;

    void validate() const;
};

struct OptimizerConfig {
    std::size_t total_iters = 25000;
    std::size_t warmup_iters = 5000;
    double lambda = 0.5;
    double position_lr_start = 2e-3;  ///< in units of the scene extent
    double position_lr_end = 2e-6;
    double attribute_lr = 1e-3;       ///< log-scale, rotation; density in units of the reference density
    double base_lr_decay = 0.1;       ///< Phase II multiplier on base-set rates
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
    double cutoff = kDefaultCutoff;
    AdcConfig adc;
    std::uint64_t seed = 0;

    void validate() const;
    double position_lr(std::size_t iteration) const;
};

enum class Phase { warmup = 1, joint = 2 };

/// First/second moments for the 11 scalar parameters of each primitive:
/// center(3), log-scale(3), quaternion(4), density(1).
struct AdamMoments {
    static constexpr std::size_t kParams = 11;
    std::vector<std::array<double, kParams>> m;
    std::vector<std::array<double, kParams>> v;
    std::uint64_t steps = 0;

    void resize(std::size_t n);
    std::size_t size() const { return m.size(); }
};

/// Positional-gradient statistics accumulated between density-control passes.
struct AdcAccumulator {
    std::vector<double> grad_sum;
    std::vector<std::uint32_t> count;

    void reset(std::size_t n);
    void add(const ParameterGradients& g, double normalizer);
};

struct LossRecord {
    std::size_t iteration = 0;
    Phase phase = Phase::warmup;
    double fit = 0.0;    ///< L_Phase1 in warm-up, L_global in joint refinement
    double cons = 0.0;   ///< L_cons (joint only)
    double total = 0.0;  ///< objective actually minimized
    std::size_t n_base = 0;
    std::size_t n_detail = 0;
};

struct AdcEvent {
    std::size_t iteration = 0;  ///< iterations completed when the pass ran
    ComponentTag tag = ComponentTag::base;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
    std::size_t size_after = 0;
};

struct TrainState {
    std::size_t iteration = 0;
    AdamMoments base_moments;
    AdamMoments detail_moments;
    AdcAccumulator base_adc;
    AdcAccumulator detail_adc;
    std::vector<LossRecord> history;
    std::vector<AdcEvent> adc_events;
    std::mt19937_64 rng;
};

/// Renders, targets and scales shared by every iteration of one run.
struct TrainContext {
    const Projector* projector = nullptr;
    const ProjectionStack* target = nullptr;     ///< raw projections P
    const ProjectionStack* lf_target = nullptr;  ///< full-resolution low-pass P_LF
    OptimizerConfig config;
    double scene_extent = 1.0;       ///< mm; scales positional rates and ADC thresholds
    double reference_density = 1.0;  ///< scales the density rate
    double target_power = 1.0;       ///< mean(P^2); normalizes the ADC statistic
};

struct Phase1Loss {
    double loss = 0.0;
    ParameterGradients grad;
    ProjectionStack rendered;
};

struct Phase2Loss {
    double loss = 0.0;
    double global = 0.0;
    double cons = 0.0;
    ParameterGradients base_grad;
    ParameterGradients detail_grad;
};

/// Mean squared error ||P_LF - P̂_base||^2 / N_pix and its gradient.
Phase1Loss loss_phase1(const ProjectionStack& lf_target, const GaussianSet& base,
                       const Projector& projector);

/// L_global + λ L_cons, both per-pixel means. Detail gradients come only from L_global.
Phase2Loss loss_phase2(const ProjectionStack& target, const ProjectionStack& lf_target,
                       const GaussianSet& base, const GaussianSet& detail,
                       const Projector& projector, double lambda);

/// One Adam update of `set` from `grad`; densities clamped at 0, quaternions renormalized.
void adam_update(GaussianSet& set, const ParameterGradients& grad, AdamMoments& moments,
                 double position_lr, double attribute_lr, double density_lr,
                 const OptimizerConfig& cfg);

struct DensifyResult {
    GaussianSet set;
    /// Source index in the input set for every output primitive; -1 for new children.
    std::vector<std::ptrdiff_t> origin;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

DensifyResult densify_and_prune(const GaussianSet& set, const AdcAccumulator& acc,
                                const AdcConfig& adc, double scene_extent, std::mt19937_64& rng);

/// One optimization iteration. In warm-up only `base` changes; `detail` is untouched.
/// Throws NumericalError on a non-finite loss.
void step(const TrainContext& ctx, Phase phase, GaussianSet& base, GaussianSet& detail,
          TrainState& state);

/// Called after every iteration with the updated sets.
using IterationObserver =
    std::function<void(const LossRecord&, const GaussianSet& base, const GaussianSet& detail)>;

/// Runs iterations [state.iteration, cfg.total_iters): warm-up while
/// iteration < warmup_iters, joint refinement afterwards.
void optimize(const TrainContext& ctx, GaussianSet& base, GaussianSet& detail, TrainState& state,
              const IterationObserver& observer = {});

/// Gradient descent on the signed objective ||target - P̂_detail||^2 over the
/// densities only (clamped at 0). Returns densities per step, row 0 = initial.
/// With `require_negative` the target must have a strictly negative pixel
/// inside some primitive footprint (std::invalid_argument otherwise); control
/// runs on non-negative targets pass false.
std::vector<std::vector<double>> explicit_hf_loss_demo(const GaussianSet& detail,
                                                       const Image2D& signed_target,
                                                       const ConeBeamGeometry& geom,
                                                       std::size_t view, std::size_t steps,
                                                       double step_fraction = 0.1,
                                                       bool require_negative = true);

std::string loss_history_csv(const std::vector<LossRecord>& history);
std::string adc_events_csv(const std::vector<AdcEvent>& events);

}  // namespace rgs
