#include "rgs/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rgs {

void AdcConfig::validate() const {
    if (interval < 1) throw std::invalid_argument("adc.interval must be >= 1");
    if (!(grad_threshold > 0.0)) throw std::invalid_argument("adc.grad_threshold must be > 0");
    if (!(split_scale_factor > 1.0)) throw std::invalid_argument("adc.split_scale_factor must be > 1");
    if (!(prune_density_fraction >= 0.0 && prune_density_fraction < 1.0))
        throw std::invalid_argument("adc.prune_density_fraction must be in [0, 1)");
    if (!(clone_scale_fraction > 0.0)) throw std::invalid_argument("adc.clone_scale_fraction must be > 0");
    if (max_primitives < 1) throw std::invalid_argument("adc.max_primitives must be >= 1");
}

void OptimizerConfig::validate() const {
    if (total_iters < 1) throw std::invalid_argument("optimizer.total_iters must be >= 1");
    if (warmup_iters > total_iters)
        throw std::invalid_argument("optimizer.warmup_iters must not exceed total_iters");
    if (!(lambda >= 0.0)) throw std::invalid_argument("optimizer.lambda must be >= 0");
    if (!(position_lr_start > 0.0 && position_lr_end > 0.0))
        throw std::invalid_argument("optimizer position learning rates must be > 0");
    if (!(attribute_lr > 0.0)) throw std::invalid_argument("optimizer.attribute_lr must be > 0");
    if (!(base_lr_decay > 0.0)) throw std::invalid_argument("optimizer.base_lr_decay must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("optimizer Adam betas must be in [0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer.epsilon must be > 0");
    if (!(cutoff > 0.0)) throw std::invalid_argument("optimizer.cutoff must be > 0");
    adc.validate();
}

double OptimizerConfig::position_lr(std::size_t iteration) const {
    const double t = std::clamp(static_cast<double>(iteration) / static_cast<double>(total_iters), 0.0, 1.0);
    return std::exp((1.0 - t) * std::log(position_lr_start) + t * std::log(position_lr_end));
}

void AdamMoments::resize(std::size_t n) {
    m.assign(n, {});
    v.assign(n, {});
}

void AdcAccumulator::reset(std::size_t n) {
    grad_sum.assign(n, 0.0);
    count.assign(n, 0);
}

void AdcAccumulator::add(const ParameterGradients& g, double normalizer) {
    if (grad_sum.size() != g.size()) reset(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
        if (g.hits[n] == 0) continue;
        grad_sum[n] += g.center[n].norm() * normalizer;
        ++count[n];
    }
}

namespace {

void check_stack(const ProjectionStack& s, const ConeBeamGeometry& geom, const char* what) {
    if (s.views.size() != geom.views())
        throw std::invalid_argument(std::string(what) + ": view count does not match the projector");
    for (const Image2D& img : s.views)
        if (img.rows != geom.detector_rows || img.cols != geom.detector_cols)
            throw std::invalid_argument(std::string(what) + ": image shape does not match the detector");
}

std::vector<Image2D> zero_like(const ProjectionStack& s) {
    std::vector<Image2D> out;
    out.reserve(s.views.size());
    for (const Image2D& img : s.views) out.emplace_back(img.rows, img.cols, 0.0);
    return out;
}

}  // namespace

Phase1Loss loss_phase1(const ProjectionStack& lf_target, const GaussianSet& base,
                       const Projector& projector) {
    check_stack(lf_target, projector.geometry(), "loss_phase1");
    Phase1Loss out;
    out.rendered = projector.render(base);
    const double inv_n = 1.0 / static_cast<double>(lf_target.pixel_count());
    std::vector<Image2D> residual = zero_like(lf_target);
    double sum = 0.0;
    for (std::size_t v = 0; v < lf_target.views.size(); ++v) {
        const auto& t = lf_target.views[v].data;
        const auto& p = out.rendered.views[v].data;
        auto& r = residual[v].data;
        for (std::size_t q = 0; q < t.size(); ++q) {
            const double e = t[q] - p[q];
            sum += e * e;
            r[q] = -2.0 * e * inv_n;
        }
    }
    out.loss = sum * inv_n;
    out.grad = projector.backward(base, residual);
    return out;
}

Phase2Loss loss_phase2(const ProjectionStack& target, const ProjectionStack& lf_target,
                       const GaussianSet& base, const GaussianSet& detail,
                       const Projector& projector, double lambda) {
    check_stack(target, projector.geometry(), "loss_phase2");
    check_stack(lf_target, projector.geometry(), "loss_phase2");
    const ProjectionStack pb = projector.render(base);
    const ProjectionStack pd = projector.render(detail);
    const double inv_n = 1.0 / static_cast<double>(target.pixel_count());
    std::vector<Image2D> r_base = zero_like(target);
    std::vector<Image2D> r_detail = zero_like(target);
    double global = 0.0;
    double cons = 0.0;
    for (std::size_t v = 0; v < target.views.size(); ++v) {
        const auto& t = target.views[v].data;
        const auto& tl = lf_target.views[v].data;
        const auto& b = pb.views[v].data;
        const auto& d = pd.views[v].data;
        for (std::size_t q = 0; q < t.size(); ++q) {
            const double eg = t[q] - (b[q] + d[q]);
            const double ec = tl[q] - b[q];
            global += eg * eg;
            cons += ec * ec;
            r_detail[v].data[q] = -2.0 * eg * inv_n;
            r_base[v].data[q] = -2.0 * (eg + lambda * ec) * inv_n;
        }
    }
    Phase2Loss out;
    out.global = global * inv_n;
    out.cons = cons * inv_n;
    out.loss = out.global + lambda * out.cons;
    out.base_grad = projector.backward(base, r_base);
    out.detail_grad = projector.backward(detail, r_detail);
    return out;
}

void adam_update(GaussianSet& set, const ParameterGradients& grad, AdamMoments& moments,
                 double position_lr, double attribute_lr, double density_lr,
                 const OptimizerConfig& cfg) {
    const std::size_t n = set.size();
    if (grad.size() != n) throw std::invalid_argument("adam_update: gradient count does not match the set");
    if (moments.size() != n) moments.resize(n);
    ++moments.steps;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(moments.steps));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(moments.steps));

    for (std::size_t i = 0; i < n; ++i) {
        GaussianPrimitive& p = set.primitives[i];
        std::array<double, AdamMoments::kParams> g;
        for (int a = 0; a < 3; ++a) g[a] = grad.center[i][a];
        for (int a = 0; a < 3; ++a) g[3 + a] = grad.scales[i][a] * p.scales[a];  // d/d log s
        for (int a = 0; a < 4; ++a) g[6 + a] = grad.rotation[i][a];
        g[10] = grad.density[i];

        auto& m = moments.m[i];
        auto& v = moments.v[i];
        std::array<double, AdamMoments::kParams> delta;
        for (std::size_t k = 0; k < AdamMoments::kParams; ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            delta[k] = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.epsilon);
        }
        for (int a = 0; a < 3; ++a) p.center[a] -= position_lr * delta[a];
        for (int a = 0; a < 3; ++a) p.scales[a] *= std::exp(-attribute_lr * delta[3 + a]);
        for (int a = 0; a < 4; ++a) p.rotation[a] -= attribute_lr * delta[6 + a];
        const double qn = p.rotation.norm();
        if (qn > 0.0 && std::isfinite(qn)) p.rotation /= qn;
        else p.rotation = Vec4(1.0, 0.0, 0.0, 0.0);
        p.density = std::max(0.0, p.density - density_lr * delta[10]);
    }
}

DensifyResult densify_and_prune(const GaussianSet& set, const AdcAccumulator& acc,
                                const AdcConfig& adc, double scene_extent, std::mt19937_64& rng) {
    adc.validate();
    const std::size_t n = set.size();
    if (acc.grad_sum.size() != n || acc.count.size() != n)
        throw std::invalid_argument("densify_and_prune: accumulator does not match the set");

    DensifyResult out;
    out.set.tag = set.tag;
    std::vector<GaussianPrimitive> prims;
    std::vector<std::ptrdiff_t> origin;
    prims.reserve(n);
    std::vector<GaussianPrimitive> added;
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::size_t i = 0; i < n; ++i) {
        const GaussianPrimitive& p = set.primitives[i];
        const double mean = acc.count[i] ? acc.grad_sum[i] / acc.count[i] : 0.0;
        if (!(mean > adc.grad_threshold)) {
            prims.push_back(p);
            origin.push_back(static_cast<std::ptrdiff_t>(i));
            continue;
        }
        if (p.scales.maxCoeff() < adc.clone_scale_fraction * scene_extent) {
            // Clone: the pair keeps the parent's line integral.
            GaussianPrimitive half = p;
            half.density *= 0.5;
            prims.push_back(half);
            origin.push_back(static_cast<std::ptrdiff_t>(i));
            Vec3 z(normal(rng), normal(rng), normal(rng));
            if (z.norm() > 1.0) z.normalize();
            half.center = p.center + rotation_matrix(p.rotation) * p.scales.cwiseProduct(z);
            added.push_back(half);
            ++out.cloned;
        } else {
            const Mat3 r = rotation_matrix(p.rotation);
            for (int c = 0; c < 2; ++c) {
                const Vec3 z(normal(rng), normal(rng), normal(rng));
                GaussianPrimitive child = p;
                child.center = p.center + r * p.scales.cwiseProduct(z);
                child.scales = p.scales / adc.split_scale_factor;
                added.push_back(child);
            }
            ++out.split;
        }
    }
    for (const GaussianPrimitive& p : added) {
        prims.push_back(p);
        origin.push_back(-1);
    }

    double dmax = 0.0;
    for (const GaussianPrimitive& p : prims) dmax = std::max(dmax, p.density);
    const double floor = adc.prune_density_fraction * dmax;
    std::vector<std::size_t> keep;
    keep.reserve(prims.size());
    for (std::size_t i = 0; i < prims.size(); ++i)
        if (prims[i].density > floor) keep.push_back(i);
    out.pruned = prims.size() - keep.size();

    if (keep.size() > adc.max_primitives) {
        std::vector<std::size_t> order = keep;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return prims[a].density > prims[b].density;
        });
        order.resize(adc.max_primitives);
        std::sort(order.begin(), order.end());
        out.pruned += keep.size() - order.size();
        keep = std::move(order);
    }

    out.set.primitives.reserve(keep.size());
    out.origin.reserve(keep.size());
    for (std::size_t i : keep) {
        out.set.primitives.push_back(prims[i]);
        out.origin.push_back(origin[i]);
    }
    return out;
}

namespace {

void remap_moments(AdamMoments& mom, const std::vector<std::ptrdiff_t>& origin) {
    AdamMoments next;
    next.steps = mom.steps;
    next.resize(origin.size());
    for (std::size_t i = 0; i < origin.size(); ++i) {
        if (origin[i] < 0) continue;
        const auto src = static_cast<std::size_t>(origin[i]);
        if (src < mom.size()) {
            next.m[i] = mom.m[src];
            next.v[i] = mom.v[src];
        }
    }
    mom = std::move(next);
}

AdcEvent run_adc(GaussianSet& set, AdamMoments& mom, AdcAccumulator& acc, const TrainContext& ctx,
                 std::mt19937_64& rng) {
    if (acc.grad_sum.size() != set.size()) acc.reset(set.size());
    DensifyResult r = densify_and_prune(set, acc, ctx.config.adc, ctx.scene_extent, rng);
    remap_moments(mom, r.origin);
    set = std::move(r.set);
    acc.reset(set.size());
    AdcEvent ev;
    ev.tag = set.tag;
    ev.cloned = r.cloned;
    ev.split = r.split;
    ev.pruned = r.pruned;
    ev.size_after = set.size();
    return ev;
}

void require_finite(double value, const char* name, std::size_t iteration, const GaussianSet& base,
                    const GaussianSet& detail) {
    if (std::isfinite(value)) return;
    std::ostringstream os;
    os << "non-finite " << name << " at iteration " << iteration << " (" << base.size() << " base, "
       << detail.size() << " detail primitives)";
    throw NumericalError(os.str());
}

}  // namespace

void step(const TrainContext& ctx, Phase phase, GaussianSet& base, GaussianSet& detail,
          TrainState& state) {
    if (!ctx.projector || !ctx.target || !ctx.lf_target)
        throw std::invalid_argument("step: training context is incomplete");
    const OptimizerConfig& cfg = ctx.config;
    const std::size_t it = state.iteration;
    const bool expect_warmup = it < cfg.warmup_iters;
    if ((phase == Phase::warmup) != expect_warmup)
        throw std::invalid_argument("step: phase does not match the iteration count");

    const double pos_lr = cfg.position_lr(it) * ctx.scene_extent;
    const double attr_lr = cfg.attribute_lr;
    const double dens_lr = cfg.attribute_lr * ctx.reference_density;
    const double adc_norm = ctx.scene_extent / ctx.target_power;

    LossRecord rec;
    rec.iteration = it;
    rec.phase = phase;
    if (phase == Phase::warmup) {
        Phase1Loss l = loss_phase1(*ctx.lf_target, base, *ctx.projector);
        require_finite(l.loss, "warm-up loss", it, base, detail);
        if (!l.grad.all_finite()) require_finite(NAN, "warm-up gradient", it, base, detail);
        rec.fit = rec.total = l.loss;
        adam_update(base, l.grad, state.base_moments, pos_lr, attr_lr, dens_lr, cfg);
        state.base_adc.add(l.grad, adc_norm);
    } else {
        Phase2Loss l = loss_phase2(*ctx.target, *ctx.lf_target, base, detail, *ctx.projector, cfg.lambda);
        require_finite(l.loss, "joint loss", it, base, detail);
        if (!l.base_grad.all_finite() || !l.detail_grad.all_finite())
            require_finite(NAN, "joint gradient", it, base, detail);
        rec.fit = l.global;
        rec.cons = l.cons;
        rec.total = l.loss;
        const double d = cfg.base_lr_decay;
        adam_update(base, l.base_grad, state.base_moments, pos_lr * d, attr_lr * d, dens_lr * d, cfg);
        adam_update(detail, l.detail_grad, state.detail_moments, pos_lr, attr_lr, dens_lr, cfg);
        state.base_adc.add(l.base_grad, adc_norm);
        state.detail_adc.add(l.detail_grad, adc_norm);
    }

    const std::size_t done = it + 1;
    const AdcConfig& adc = cfg.adc;
    if (adc.enabled && done % adc.interval == 0 && done + adc.interval <= cfg.total_iters) {
        AdcEvent ev = run_adc(base, state.base_moments, state.base_adc, ctx, state.rng);
        ev.iteration = done;
        state.adc_events.push_back(ev);
        if (phase == Phase::joint && !detail.empty()) {
            ev = run_adc(detail, state.detail_moments, state.detail_adc, ctx, state.rng);
            ev.iteration = done;
            state.adc_events.push_back(ev);
        }
    }

    rec.n_base = base.size();
    rec.n_detail = detail.size();
    state.history.push_back(rec);
    state.iteration = done;
}

void optimize(const TrainContext& ctx, GaussianSet& base, GaussianSet& detail, TrainState& state,
              const IterationObserver& observer) {
    ctx.config.validate();
    if (!(ctx.scene_extent > 0.0 && ctx.reference_density > 0.0 && ctx.target_power > 0.0))
        throw std::invalid_argument("optimize: scene scales must be positive");
    while (state.iteration < ctx.config.total_iters) {
        const Phase phase = state.iteration < ctx.config.warmup_iters ? Phase::warmup : Phase::joint;
        step(ctx, phase, base, detail, state);
        if (observer) observer(state.history.back(), base, detail);
    }
}

std::vector<std::vector<double>> explicit_hf_loss_demo(const GaussianSet& detail,
                                                       const Image2D& signed_target,
                                                       const ConeBeamGeometry& geom,
                                                       std::size_t view, std::size_t steps,
                                                       double step_fraction, bool require_negative) {
    geom.validate();
    if (view >= geom.views()) throw std::out_of_range("explicit_hf_loss_demo: view index out of range");
    if (detail.empty()) throw std::invalid_argument("explicit_hf_loss_demo: empty primitive set");
    if (signed_target.rows != geom.detector_rows || signed_target.cols != geom.detector_cols)
        throw std::invalid_argument("explicit_hf_loss_demo: target shape does not match the detector");
    if (!(step_fraction > 0.0 && step_fraction <= 1.0))
        throw std::invalid_argument("explicit_hf_loss_demo: step_fraction must be in (0, 1]");

    ConeBeamGeometry single = geom;
    single.angles = {geom.angles[view]};
    const Projector proj(single);

    // Unit-density kernels give the curvature bound for a monotone step size.
    double kernel_energy = 0.0;
    bool negative_covered = false;
    for (const GaussianPrimitive& p : detail.primitives) {
        GaussianSet one;
        one.primitives = {p};
        one.primitives[0].density = 1.0;
        const Image2D k = proj.render_view(one, 0);
        for (std::size_t q = 0; q < k.size(); ++q) {
            kernel_energy += k.data[q] * k.data[q];
            if (k.data[q] > 0.0 && signed_target.data[q] < 0.0) negative_covered = true;
        }
    }
    if (require_negative && !negative_covered)
        throw std::invalid_argument(
            "explicit_hf_loss_demo: target has no negative pixel inside any primitive footprint");
    if (!(kernel_energy > 0.0))
        throw std::invalid_argument("explicit_hf_loss_demo: primitives do not reach the detector");
    const double eta = step_fraction / (2.0 * kernel_energy);

    GaussianSet set = detail;
    std::vector<std::vector<double>> trace;
    trace.reserve(steps + 1);
    auto record = [&] {
        std::vector<double> d(set.size());
        for (std::size_t i = 0; i < set.size(); ++i) d[i] = set.primitives[i].density;
        trace.push_back(std::move(d));
    };
    record();
    Image2D residual(signed_target.rows, signed_target.cols);
    for (std::size_t s = 0; s < steps; ++s) {
        const Image2D pred = proj.render_view(set, 0);
        for (std::size_t q = 0; q < residual.size(); ++q)
            residual.data[q] = -2.0 * (signed_target.data[q] - pred.data[q]);
        const ParameterGradients g = proj.backward_view(set, 0, residual);
        for (std::size_t i = 0; i < set.size(); ++i)
            set.primitives[i].density = std::max(0.0, set.primitives[i].density - eta * g.density[i]);
        record();
    }
    return trace;
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
    std::ostringstream os;
    os.precision(17);
    os << "iteration,phase,fit,cons,total,n_base,n_detail\n";
    for (const LossRecord& r : history)
        os << r.iteration << ',' << static_cast<int>(r.phase) << ',' << r.fit << ',' << r.cons << ','
           << r.total << ',' << r.n_base << ',' << r.n_detail << '\n';
    return os.str();
}

std::string adc_events_csv(const std::vector<AdcEvent>& events) {
    std::ostringstream os;
    os << "iteration,component,cloned,split,pruned,size_after\n";
    for (const AdcEvent& e : events)
        os << e.iteration << ',' << to_string(e.tag) << ',' << e.cloned << ',' << e.split << ','
           << e.pruned << ',' << e.size_after << '\n';
    return os.str();
}

}  // namespace rgs
