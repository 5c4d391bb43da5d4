#include "commands.hpp"

#include "rgs/parallel.hpp"
#include "rgs/pipeline.hpp"
#include "rgs/types.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

// 0 success, 2 usage or configuration error, 3 runtime or numerical failure.
constexpr int kUsageError = 2;
constexpr int kRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian splatting reconstruction for sparse-view cone-beam CT"};
    app.require_subcommand(1);
    int workers = 0;
    app.add_option("--workers", workers, "Worker threads (default: RGS_WORKERS or all cores)")
        ->check(CLI::NonNegativeNumber);

    rgs::cli::SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate sparse-view projections of a phantom");
    simulate->add_option("--phantom", sim.phantom, "head, texture, ball or a phantom JSON file")
        ->capture_default_str();
    simulate->add_option("--half-extent", sim.half_extent, "Stock phantom half extent in mm (3 values)")
        ->expected(3)
        ->capture_default_str();
    simulate->add_option("--attenuation", sim.attenuation_scale, "Stock phantom attenuation per mm")
        ->capture_default_str();
    simulate->add_option("--views", sim.views, "Number of views over 360 degrees")->capture_default_str();
    simulate->add_option("--rows", sim.rows, "Detector rows")->capture_default_str();
    simulate->add_option("--cols", sim.cols, "Detector columns")->capture_default_str();
    simulate->add_option("--pitch", sim.pitch, "Detector pixel pitch in mm")->capture_default_str();
    simulate->add_option("--sad", sim.sad, "Source to axis distance in mm")->capture_default_str();
    simulate->add_option("--sdd", sim.sdd, "Source to detector distance in mm")->capture_default_str();
    simulate->add_option("--grid", sim.grid, "Ground-truth grid size per axis")->capture_default_str();
    simulate->add_option("--spacing", sim.spacing, "Ground-truth voxel spacing in mm")->capture_default_str();
    simulate->add_option("--i0", sim.i0, "Photon count for Poisson noise (0 = noiseless)")
        ->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
    simulate->add_option("-o,--out", sim.out, "Output directory")->capture_default_str();

    rgs::cli::ReconstructOptions rec;
    auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct a volume from projections");
    reconstruct->add_option("-p,--projections", rec.projections, "Projection stack (.rgsp)");
    reconstruct->add_option("-c,--config", rec.config, "JSON config file");
    reconstruct->add_option("--set", rec.overrides, "Config override key.path=value (repeatable)");
    reconstruct->add_option("-o,--out", rec.out, "Output directory");
    reconstruct->add_flag("--disable-wavelet", rec.disable_wavelet, "Base set only, fit raw projections");
    reconstruct->add_flag("--disable-curriculum", rec.disable_curriculum, "Joint optimization from the start");
    reconstruct->add_option("--checkpoint-interval", rec.checkpoint_interval,
                            "Write Gaussian sets every N iterations (0 = off)");
    reconstruct->add_flag("-q,--quiet", rec.quiet, "No progress output");

    bool print_config = false;
    auto* defaults = app.add_subcommand("config", "Print the default configuration as JSON");
    defaults->callback([&] { print_config = true; });

    rgs::cli::EvaluateOptions ev;
    auto* evaluate = app.add_subcommand("evaluate", "Compare a reconstruction with ground truth");
    evaluate->add_option("--rec", ev.rec, "Reconstructed volume")->required();
    evaluate->add_option("--gt", ev.gt, "Ground-truth volume")->required();
    evaluate->add_option("-o,--out", ev.out, "Report directory")->capture_default_str();
    evaluate->add_option("--bins", ev.bins, "Radial spectrum bins (0 = half the slice size)")->capture_default_str();
    evaluate->add_flag("--slices", ev.export_slices, "Export central axial slices as PGM");

    rgs::cli::SpectraOptions sp;
    auto* spectra = app.add_subcommand("spectra", "Band-wise spectral error across checkpoints");
    spectra->add_option("--run", sp.run, "Reconstruction output directory")->required();
    spectra->add_option("--gt", sp.gt, "Ground-truth volume")->required();
    spectra->add_option("-o,--out", sp.out, "CSV path (default RUN/band_error.csv)");
    spectra->add_option("--bins", sp.bins, "Radial spectrum bins (0 = half the slice size)")->capture_default_str();

    rgs::cli::DemoOptions demo;
    auto* hf = app.add_subcommand("demo-hf-suppression",
                                  "Fit a detail primitive to a signed target and record its density");
    hf->add_option("--target", demo.target, "negative, positive or zero")->capture_default_str();
    hf->add_option("--amplitude", demo.amplitude, "Target magnitude")->capture_default_str();
    hf->add_option("--initial-density", demo.initial_density, "Starting density")->capture_default_str();
    hf->add_option("--scale", demo.scale, "Primitive scale in mm")->capture_default_str();
    hf->add_option("--steps", demo.steps, "Gradient steps")->capture_default_str();
    hf->add_option("--step-fraction", demo.step_fraction, "Step size relative to the stability limit")
        ->capture_default_str();
    hf->add_option("-o,--out", demo.out, "Trajectory CSV")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    if (workers > 0) rgs::set_worker_count(workers);

    try {
        if (print_config) {
            std::cout << rgs::config_to_json(rgs::RunConfig{});
            return 0;
        }
        if (*simulate) return rgs::cli::run_simulate(sim);
        if (*reconstruct) return rgs::cli::run_reconstruct(rec);
        if (*evaluate) return rgs::cli::run_evaluate(ev);
        if (*spectra) return rgs::cli::run_spectra(sp);
        if (*hf) return rgs::cli::run_demo(demo);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
