#include "rgs/pipeline.hpp"

#include "rgs/wavelet.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>

namespace rgs {

using nlohmann::json;

namespace {

struct Binding {
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

template <typename T, typename Access>
Binding bind(Access access) {
    return Binding{[access](const RunConfig& c) { return json(access(const_cast<RunConfig&>(c))); },
                   [access](RunConfig& c, const json& v) { access(c) = v.get<T>(); }};
}

Binding bind_vec3(std::function<Vec3&(RunConfig&)> access) {
    return Binding{[access](const RunConfig& c) {
                       const Vec3& v = access(const_cast<RunConfig&>(c));
                       return json::array({v[0], v[1], v[2]});
                   },
                   [access](RunConfig& c, const json& v) {
                       const auto a = v.is_number() ? std::vector<double>{v.get<double>()}
                                                    : v.get<std::vector<double>>();
                       if (a.size() == 1) access(c) = Vec3::Constant(a[0]);
                       else if (a.size() == 3) access(c) = Vec3(a[0], a[1], a[2]);
                       else throw std::invalid_argument("expected 1 or 3 numbers");
                   }};
}

using Dims3 = std::array<std::size_t, 3>;

const std::map<std::string, Binding>& bindings() {
    static const std::map<std::string, Binding> table = [] {
        std::map<std::string, Binding> b;
#define RGS_BIND(key, type, member) b[key] = bind<type>([](RunConfig& c) -> type& { return c.member; })
        RGS_BIND("paths.projections", std::string, projections);
        RGS_BIND("paths.output_dir", std::string, output_dir);
        RGS_BIND("init.n_base", std::size_t, init.n_base);
        RGS_BIND("init.n_detail", std::size_t, init.n_detail);
        RGS_BIND("init.tau_air", double, init.tau_air);
        RGS_BIND("init.k", double, init.k);
        RGS_BIND("init.detail_initial_density", double, init.detail_initial_density);
        RGS_BIND("init.base_density_scale", double, init.base_density_scale);
        RGS_BIND("optimizer.total_iters", std::size_t, optimizer.total_iters);
        RGS_BIND("optimizer.warmup_iters", std::size_t, optimizer.warmup_iters);
        RGS_BIND("optimizer.lambda", double, optimizer.lambda);
        RGS_BIND("optimizer.position_lr_start", double, optimizer.position_lr_start);
        RGS_BIND("optimizer.position_lr_end", double, optimizer.position_lr_end);
        RGS_BIND("optimizer.attribute_lr", double, optimizer.attribute_lr);
        RGS_BIND("optimizer.base_lr_decay", double, optimizer.base_lr_decay);
        RGS_BIND("optimizer.beta1", double, optimizer.beta1);
        RGS_BIND("optimizer.beta2", double, optimizer.beta2);
        RGS_BIND("optimizer.epsilon", double, optimizer.epsilon);
        RGS_BIND("optimizer.cutoff", double, optimizer.cutoff);
        RGS_BIND("optimizer.adc.enabled", bool, optimizer.adc.enabled);
        RGS_BIND("optimizer.adc.interval", std::size_t, optimizer.adc.interval);
        RGS_BIND("optimizer.adc.grad_threshold", double, optimizer.adc.grad_threshold);
        RGS_BIND("optimizer.adc.split_scale_factor", double, optimizer.adc.split_scale_factor);
        RGS_BIND("optimizer.adc.prune_density_fraction", double, optimizer.adc.prune_density_fraction);
        RGS_BIND("optimizer.adc.clone_scale_fraction", double, optimizer.adc.clone_scale_fraction);
        RGS_BIND("optimizer.adc.max_primitives", std::size_t, optimizer.adc.max_primitives);
        RGS_BIND("ablation.disable_wavelet", bool, disable_wavelet);
        RGS_BIND("ablation.disable_curriculum", bool, disable_curriculum);
        RGS_BIND("checkpoint_interval", std::size_t, checkpoint_interval);
#undef RGS_BIND
        b["grid.dims"] = Binding{[](const RunConfig& c) { return json(c.grid_dims); },
                                 [](RunConfig& c, const json& v) {
                                     if (v.is_number()) {
                                         const auto n = v.get<std::size_t>();
                                         c.grid_dims = {n, n, n};
                                     } else {
                                         c.grid_dims = v.get<Dims3>();
                                     }
                                 }};
        b["grid.spacing"] = bind_vec3([](RunConfig& c) -> Vec3& { return c.grid_spacing; });
        b["seed"] = Binding{[](const RunConfig& c) { return json(c.optimizer.seed); },
                            [](RunConfig& c, const json& v) {
                                c.optimizer.seed = v.get<std::uint64_t>();
                                c.init.seed = c.optimizer.seed;
                            }};
        b["fdk.filter"] = Binding{
            [](const RunConfig& c) { return json(c.fdk_filter == RampKind::hann ? "hann" : "ram_lak"); },
            [](RunConfig& c, const json& v) {
                const auto s = v.get<std::string>();
                if (s == "ram_lak") c.fdk_filter = RampKind::ram_lak;
                else if (s == "hann") c.fdk_filter = RampKind::hann;
                else throw std::invalid_argument("expected \"ram_lak\" or \"hann\"");
            }};
        return b;
    }();
    return table;
}

void set_key(RunConfig& cfg, const std::string& key, const json& value, const std::string& source) {
    const auto& table = bindings();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(source + ": unknown key '" + key + "'");
    try {
        it->second.set(cfg, value);
    } catch (const std::exception& e) {
        throw ConfigError(source + ": " + key + ": invalid value " + value.dump() + " (" + e.what() + ")");
    }
}

void apply_object(RunConfig& cfg, const json& obj, const std::string& prefix, const std::string& source) {
    for (const auto& [k, v] : obj.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) apply_object(cfg, v, key, source);
        else set_key(cfg, key, v, source);
    }
}

void nest(json& root, const std::string& key, json value) {
    json* node = &root;
    std::size_t start = 0;
    for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1)
        node = &(*node)[key.substr(start, dot - start)];
    (*node)[key.substr(start)] = std::move(value);
}

void rethrow_as_config(const std::function<void()>& fn, const std::string& prefix) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(prefix + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    rethrow_as_config([&] { init.validate(); }, "");
    rethrow_as_config([&] { optimizer.validate(); }, "");
    rethrow_as_config([&] { grid().validate(); }, "grid: ");
    if (disable_wavelet && disable_curriculum)
        throw ConfigError("ablation: disable_wavelet and disable_curriculum are separate variants; set at most one");
    if (!disable_wavelet && !disable_curriculum &&
        !(optimizer.warmup_iters > 0 && optimizer.warmup_iters < optimizer.total_iters))
        throw ConfigError("optimizer.warmup_iters must be in (0, total_iters)");
}

std::string config_to_json(const RunConfig& cfg) {
    json root = json::object();
    for (const auto& [key, b] : bindings()) nest(root, key, b.get(cfg));
    return root.dump(2) + '\n';
}

void apply_config_json(RunConfig& cfg, const std::string& json_text, const std::string& source) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(source + ": top level must be an object");
    apply_object(cfg, j, "", source);
}

void apply_config_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "': expected key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set_key(cfg, key, value, "override");
}

double scene_extent(const GridSpec& grid) { return 0.5 * grid.bounds().extent().norm(); }

ProjectionStack lowpass_stack(const ProjectionStack& p) {
    ProjectionStack out;
    out.geometry = p.geometry;
    out.views.reserve(p.views.size());
    for (const Image2D& img : p.views) out.views.push_back(lowpass_projection(img));
    return out;
}

ReconstructionResult reconstruct(const ProjectionStack& p, const RunConfig& cfg,
                                 const IterationObserver& observer) {
    cfg.validate();
    p.validate();
    const GridSpec grid = cfg.grid();

    ReconstructionResult out;
    const ProjectionStack p_lf = lowpass_stack(p);

    // Low-frequency prior; the ablation without the spectral split uses raw projections.
    const ReconResult prior = fdk(cfg.disable_wavelet ? p : p_lf, grid, cfg.fdk_filter);
    out.v_lf = prior.volume;
    out.outside_fov = prior.outside_fov;
    out.detail.tag = ComponentTag::detail;

    // Nothing attenuates: the prior is identically zero and so is the answer.
    if (!(out.v_lf.max_value() > 0.0)) {
        out.volume = VoxelVolume(grid);
        return out;
    }

    InitConfig init = cfg.init;
    if (cfg.disable_wavelet) init.n_base += init.n_detail;
    BaseInit base = init_base(out.v_lf, init);
    out.base = std::move(base.set);
    out.base_scale = base.base_scale;

    double reference_density = 0.0;
    for (const GaussianPrimitive& g : out.base.primitives) reference_density = std::max(reference_density, g.density);
    if (!(reference_density > 0.0)) throw NumericalError("reconstruct: base initialization has zero density");

    if (!cfg.disable_wavelet) {
        std::vector<EnergyMap> maps;
        maps.reserve(p.views.size());
        for (const Image2D& img : p.views) maps.push_back(energy_map(dwt2(img)));
        out.v_sal = backproject(saliency_stack(maps, p.geometry), grid);
        out.detail = init_detail(out.v_sal, init, out.base_scale, reference_density);
    }

    double power = 0.0;
    for (const Image2D& img : p.views)
        for (double x : img.data) power += x * x;
    power /= static_cast<double>(p.pixel_count());
    if (!(power > 0.0)) power = 1.0;

    const Projector projector(p.geometry, cfg.optimizer.cutoff);
    TrainContext ctx;
    ctx.projector = &projector;
    ctx.target = &p;
    ctx.lf_target = cfg.disable_wavelet ? &p : &p_lf;
    ctx.config = cfg.optimizer;
    if (cfg.disable_wavelet) ctx.config.warmup_iters = ctx.config.total_iters;
    if (cfg.disable_curriculum) ctx.config.warmup_iters = 0;
    ctx.scene_extent = scene_extent(grid);
    ctx.reference_density = reference_density;
    ctx.target_power = power;

    out.state.rng.seed(cfg.optimizer.seed);
    optimize(ctx, out.base, out.detail, out.state, observer);

    out.volume = voxelize({std::cref(out.base), std::cref(out.detail)}, grid, cfg.optimizer.cutoff);
    return out;
}

}  // namespace rgs
