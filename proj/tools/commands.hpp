#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rgs::cli {

struct SimulateOptions {
    std::string phantom = "head";  ///< head, texture, ball or a phantom JSON file
    std::vector<double> half_extent{20.0, 20.0, 16.0};
    double attenuation_scale = 0.02;
    std::size_t views = 20;
    std::size_t rows = 64;
    std::size_t cols = 96;
    double pitch = 1.0;
    double sad = 400.0;
    double sdd = 600.0;
    std::size_t grid = 64;
    double spacing = 0.7;
    double i0 = 0.0;  ///< photon count; 0 keeps the projections noiseless
    std::uint64_t seed = 0;
    std::string out = "sim";
};

struct ReconstructOptions {
    std::string projections;
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    bool disable_wavelet = false;
    bool disable_curriculum = false;
    long long checkpoint_interval = -1;  ///< -1 keeps the config value
    bool quiet = false;
};

struct EvaluateOptions {
    std::string rec;
    std::string gt;
    std::string out = ".";
    std::size_t bins = 0;  ///< 0 picks half the slice size
    bool export_slices = false;
};

struct SpectraOptions {
    std::string run;
    std::string gt;
    std::string out;
    std::size_t bins = 0;  ///< 0 picks half the slice size
};

struct DemoOptions {
    std::string target = "negative";  ///< negative, positive or zero
    double amplitude = 0.05;
    double initial_density = 0.01;
    double scale = 1.5;
    std::size_t steps = 500;
    double step_fraction = 0.1;
    std::string out = "hf_trajectory.csv";
};

int run_simulate(const SimulateOptions& o);
int run_reconstruct(const ReconstructOptions& o);
int run_evaluate(const EvaluateOptions& o);
int run_spectra(const SpectraOptions& o);
int run_demo(const DemoOptions& o);

}  // namespace rgs::cli
