#include "commands.hpp"

#include "rgs/io.hpp"
#include "rgs/metrics.hpp"
#include "rgs/phantom.hpp"
#include "rgs/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;

namespace rgs::cli {

namespace {

AnalyticPhantom load_phantom(const SimulateOptions& o) {
    if (o.half_extent.size() != 3) throw InputError("--half-extent takes 3 values");
    const Vec3 half(o.half_extent[0], o.half_extent[1], o.half_extent[2]);
    if (o.phantom == "head") return shepp_logan_phantom(half, o.attenuation_scale);
    if (o.phantom == "texture") return texture_phantom(half, o.attenuation_scale);
    if (o.phantom == "ball") return ball_phantom(half.minCoeff(), o.attenuation_scale);
    return read_phantom(o.phantom);
}

std::string checkpoint_name(std::size_t iteration, const char* part) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "iter_%06zu.%s.rgsg", iteration, part);
    return buf;
}

std::size_t auto_bins(std::size_t requested, const Image2D& slice) {
    return requested > 0 ? requested : std::max<std::size_t>(1, std::min(slice.rows, slice.cols) / 2);
}

void log_line(bool quiet, const std::string& text) {
    if (!quiet) std::cout << text << std::endl;
}

}  // namespace

int run_simulate(const SimulateOptions& o) {
    if (o.views == 0) throw InputError("--views must be at least 1");
    const AnalyticPhantom phantom = load_phantom(o);

    ConeBeamGeometry geom;
    geom.sad = o.sad;
    geom.sdd = o.sdd;
    geom.detector_rows = o.rows;
    geom.detector_cols = o.cols;
    geom.pixel_pitch_u = geom.pixel_pitch_v = o.pitch;
    geom.angles = ConeBeamGeometry::full_scan_angles(o.views);
    geom.validate();

    ProjectionStack stack = simulate_drr(phantom, geom);
    if (o.i0 > 0.0) stack = add_noise(stack, o.i0, o.seed);
    const GridSpec grid = GridSpec::centered({o.grid, o.grid, o.grid}, Vec3::Constant(o.spacing));
    const VoxelVolume gt = rasterize_phantom(phantom, grid);

    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_projections(dir / "projections.rgsp", stack);
    write_volume(dir / "ground_truth.rgsv", gt);
    write_phantom(dir / "phantom.json", phantom);
    std::cout << "wrote " << (dir / "projections.rgsp").string() << " (" << geom.views() << " views, "
              << geom.detector_rows << "x" << geom.detector_cols << ") and ground_truth.rgsv ("
              << o.grid << "^3)\n";
    return 0;
}

int run_reconstruct(const ReconstructOptions& o) {
    RunConfig cfg;
    if (!o.config.empty()) apply_config_json(cfg, read_text(o.config), o.config);
    if (!o.projections.empty()) cfg.projections = o.projections;
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.disable_wavelet) cfg.disable_wavelet = true;
    if (o.disable_curriculum) cfg.disable_curriculum = true;
    if (o.checkpoint_interval >= 0) cfg.checkpoint_interval = static_cast<std::size_t>(o.checkpoint_interval);
    for (const std::string& kv : o.overrides) apply_config_override(cfg, kv);
    if (cfg.projections.empty()) throw ConfigError("paths.projections: no projection file given");
    cfg.validate();

    const ProjectionStack stack = read_projections(cfg.projections);
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_text(dir / "config.json", config_to_json(cfg));
    if (cfg.checkpoint_interval > 0) fs::create_directories(dir / "checkpoints");

    const std::size_t total = cfg.optimizer.total_iters;
    const std::size_t report_every = std::max<std::size_t>(1, total / 20);
    auto observer = [&](const LossRecord& rec, const GaussianSet& base, const GaussianSet& detail) {
        const std::size_t done = rec.iteration + 1;
        if (cfg.checkpoint_interval > 0 && (done % cfg.checkpoint_interval == 0 || done == total)) {
            write_gaussians(dir / "checkpoints" / checkpoint_name(done, "base"), base);
            write_gaussians(dir / "checkpoints" / checkpoint_name(done, "detail"), detail);
        }
        if (done % report_every == 0 || done == total) {
            std::ostringstream os;
            os << "iter " << done << "/" << total << " phase " << static_cast<int>(rec.phase) << " loss "
               << std::setprecision(6) << rec.total << " base " << rec.n_base << " detail " << rec.n_detail;
            log_line(o.quiet, os.str());
        }
    };

    const ReconstructionResult r = reconstruct(stack, cfg, observer);
    if (r.outside_fov) std::cerr << "warning: part of the grid lies outside the scanned field of view\n";

    write_volume(dir / "volume.rgsv", r.volume);
    write_gaussians(dir / "base.rgsg", r.base);
    write_gaussians(dir / "detail.rgsg", r.detail);
    write_text(dir / "loss.csv", loss_history_csv(r.state.history));
    write_text(dir / "adc.csv", adc_events_csv(r.state.adc_events));
    std::cout << "wrote " << (dir / "volume.rgsv").string() << " (" << r.base.size() << " base, "
              << r.detail.size() << " detail primitives)\n";
    return 0;
}

int run_evaluate(const EvaluateOptions& o) {
    const VoxelVolume rec = read_volume(o.rec);
    const VoxelVolume gt = read_volume(o.gt);
    if (rec.grid.dims != gt.grid.dims)
        throw InputError("reconstruction and ground truth have different dimensions");

    const double p = psnr(rec, gt);
    const double s = ssim(rec, gt);
    const Image2D rs = central_axial_slice(rec);
    const Image2D gs = central_axial_slice(gt);
    const std::size_t bins = auto_bins(o.bins, gs);
    const SpectrumProfile gt_spec = radial_spectrum(gs, bins);
    const SpectrumProfile err = spectrum_relative_error(radial_spectrum(rs, bins), gt_spec);
    const double upper = upper_band_error(err);

    const fs::path dir(o.out);
    fs::create_directories(dir);
    json report{{"reconstruction", o.rec},
                {"ground_truth", o.gt},
                {"psnr_db", p},
                {"ssim", s},
                {"spectrum_bins", bins},
                {"upper_band_relative_error", upper}};
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "spectrum.csv", spectrum_csv(radial_spectrum(rs, bins), gt_spec));
    if (o.export_slices) {
        const double lo = gt.min_value();
        const double hi = gt.max_value();
        write_pgm(dir / "slice_rec.pgm", rs, lo, hi);
        write_pgm(dir / "slice_gt.pgm", gs, lo, hi);
    }

    std::cout << std::fixed << std::setprecision(4) << "psnr_db " << p << "\nssim " << s
              << "\nupper_band_relative_error " << upper << "\n";
    return 0;
}

int run_spectra(const SpectraOptions& o) {
    const fs::path run(o.run);
    const fs::path ckpt = run / "checkpoints";
    if (!fs::is_directory(ckpt)) throw InputError("no checkpoints directory in " + run.string());

    RunConfig cfg;
    if (fs::exists(run / "config.json")) apply_config_json(cfg, read_text(run / "config.json"), "config.json");
    const VoxelVolume gt = read_volume(o.gt);

    const std::regex name_re(R"(iter_(\d+)\.base\.rgsg)");
    std::map<std::size_t, fs::path> found;
    for (const auto& entry : fs::directory_iterator(ckpt)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, name_re)) found[std::stoul(m[1])] = entry.path();
    }
    if (found.empty()) throw InputError("no checkpoints found in " + ckpt.string());

    std::vector<SliceCheckpoint> slices;
    for (const auto& [it, base_path] : found) {
        const GaussianSet base = read_gaussians(base_path);
        const fs::path detail_path = ckpt / checkpoint_name(it, "detail");
        if (!fs::exists(detail_path)) throw InputError("missing checkpoint " + detail_path.string());
        const GaussianSet detail = read_gaussians(detail_path);
        const VoxelVolume v = voxelize({base, detail}, gt.grid, cfg.optimizer.cutoff);
        slices.push_back({it, central_axial_slice(v)});
    }
    const Image2D gs = central_axial_slice(gt);
    const BandErrorCurve curve = band_error_curve(slices, gs, auto_bins(o.bins, gs));
    const fs::path out = o.out.empty() ? run / "band_error.csv" : fs::path(o.out);
    write_text(out, band_error_csv(curve));
    std::cout << "wrote " << out.string() << " (" << slices.size() << " checkpoints)\n";
    return 0;
}

int run_demo(const DemoOptions& o) {
    double fill = 0.0;
    double density = o.initial_density;
    if (o.target == "negative")
        fill = -std::abs(o.amplitude);
    else if (o.target == "positive")
        fill = std::abs(o.amplitude);
    else if (o.target == "zero")
        density = 0.0;
    else
        throw InputError("--target must be negative, positive or zero");

    ConeBeamGeometry geom;
    geom.detector_rows = geom.detector_cols = 32;
    geom.angles = {0.0};
    GaussianSet detail;
    detail.tag = ComponentTag::detail;
    GaussianPrimitive p;
    p.scales = Vec3::Constant(o.scale);
    p.density = density;
    detail.primitives.push_back(p);

    const Image2D target(geom.detector_rows, geom.detector_cols, fill);
    const auto traj = explicit_hf_loss_demo(detail, target, geom, 0, o.steps, o.step_fraction,
                                            o.target == "negative");

    std::ostringstream os;
    os.precision(17);
    os << "step,density\n";
    for (std::size_t s = 0; s < traj.size(); ++s) os << s << ',' << traj[s][0] << '\n';
    write_text(o.out, os.str());
    std::cout << "initial density " << traj.front()[0] << ", final density " << traj.back()[0] << " after "
              << o.steps << " steps\nwrote " << o.out << "\n";
    return 0;
}

}  // namespace rgs::cli
