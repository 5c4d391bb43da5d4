#include "rgs/io.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / ("rgs_cli_tests_" + std::to_string(::getpid()));

int run(const std::string& args) {
    const std::string cmd = std::string(RGS_CLI_PATH) + " " + args + " > " + (kWork / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() { return rgs::read_text(kWork / "last.log"); }

const std::string kSmallSim = "simulate --phantom ball --half-extent 6 6 6 --views 6 --rows 16 --cols 16 "
                              "--pitch 1.5 --grid 16 --spacing 1.25";
const std::string kSmallRec = "--set grid.dims=16 --set grid.spacing=1.25 --set init.n_base=80 "
                              "--set init.n_detail=40 --set optimizer.total_iters=12 "
                              "--set optimizer.warmup_iters=4 -q";

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        ASSERT_EQ(run(kSmallSim + " -o " + (kWork / "sim").string()), 0) << last_log();
    }
    static void TearDownTestSuite() { fs::remove_all(kWork); }
    static fs::path sim(const char* name) { return kWork / "sim" / name; }
};

}  // namespace

TEST_F(Cli, SimulateWritesStack) {
    const rgs::ProjectionStack s = rgs::read_projections(sim("projections.rgsp"));
    EXPECT_EQ(s.view_count(), 6u);
    EXPECT_EQ(s.views[0].rows, 16u);
    EXPECT_TRUE(fs::exists(sim("ground_truth.rgsv")));
    EXPECT_TRUE(fs::exists(sim("phantom.json")));

    ASSERT_EQ(run("simulate --phantom texture --views 20 --rows 8 --cols 8 --grid 8 -o " +
                  (kWork / "sim20").string()),
              0)
        << last_log();
    EXPECT_EQ(rgs::read_projections(kWork / "sim20" / "projections.rgsp").view_count(), 20u);
}

TEST_F(Cli, SimulateFromPhantomFile) {
    ASSERT_EQ(run("simulate --phantom " + sim("phantom.json").string() +
                  " --views 6 --rows 16 --cols 16 --pitch 1.5 --grid 16 --spacing 1.25 -o " +
                  (kWork / "sim_file").string()),
              0)
        << last_log();
    EXPECT_EQ(rgs::read_text(kWork / "sim_file" / "projections.rgsp"), rgs::read_text(sim("projections.rgsp")));
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("simulate --views 0 -o " + (kWork / "bad").string()), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("reconstruct -p " + sim("projections.rgsp").string() + " --set optimizer.lamda=1"), 2);
    EXPECT_NE(last_log().find("optimizer.lamda"), std::string::npos);
    EXPECT_EQ(run("reconstruct -p " + sim("projections.rgsp").string() + " --disable-wavelet --disable-curriculum"),
              2);
    EXPECT_EQ(run("reconstruct"), 2);
    EXPECT_EQ(run("simulate --phantom " + (kWork / "missing.json").string()), 2);
}

TEST_F(Cli, RuntimeErrorsExitThree) {
    // A run directory below a regular file cannot be created.
    rgs::write_text(kWork / "plain_file", "x");
    EXPECT_EQ(run("reconstruct -p " + sim("projections.rgsp").string() + " " + kSmallRec + " -o " +
                  (kWork / "plain_file" / "run").string()),
              3);
}

TEST_F(Cli, ReconstructOutputsAndDeterminism) {
    const std::string base = "reconstruct -p " + sim("projections.rgsp").string() + " " + kSmallRec +
                             " --set seed=3 --checkpoint-interval 6 -o ";
    ASSERT_EQ(run(base + (kWork / "r1").string()), 0) << last_log();
    ASSERT_EQ(run(base + (kWork / "r2").string()), 0) << last_log();
    for (const char* f : {"volume.rgsv", "base.rgsg", "detail.rgsg", "loss.csv"})
        EXPECT_EQ(rgs::read_text(kWork / "r1" / f), rgs::read_text(kWork / "r2" / f)) << f;
    for (const char* f : {"config.json", "adc.csv", "checkpoints/iter_000006.base.rgsg",
                          "checkpoints/iter_000012.detail.rgsg"})
        EXPECT_TRUE(fs::exists(kWork / "r1" / f)) << f;

    const auto cfg = nlohmann::json::parse(rgs::read_text(kWork / "r1" / "config.json"));
    EXPECT_EQ(cfg["optimizer"]["total_iters"], 12);

    ASSERT_EQ(run("spectra --run " + (kWork / "r1").string() + " --gt " + sim("ground_truth.rgsv").string()), 0)
        << last_log();
    const std::string curve = rgs::read_text(kWork / "r1" / "band_error.csv");
    EXPECT_EQ(curve.rfind("iteration,bin,rel_err\n", 0), 0u);
    EXPECT_NE(curve.find("\n12,"), std::string::npos);
}

TEST_F(Cli, DisableCurriculumHasNoWarmupRows) {
    ASSERT_EQ(run("reconstruct -p " + sim("projections.rgsp").string() + " " + kSmallRec +
                  " --disable-curriculum -o " + (kWork / "nc").string()),
              0)
        << last_log();
    const std::string loss = rgs::read_text(kWork / "nc" / "loss.csv");
    std::size_t rows = 0;
    std::size_t pos = loss.find('\n') + 1;
    while (pos < loss.size()) {
        const std::size_t end = loss.find('\n', pos);
        const std::string line = loss.substr(pos, end - pos);
        EXPECT_EQ(line.substr(line.find(',') + 1, 2), "2,") << line;
        ++rows;
        pos = end + 1;
    }
    EXPECT_EQ(rows, 12u);
}

TEST_F(Cli, EvaluateIdentical) {
    const fs::path out = kWork / "eval";
    ASSERT_EQ(run("evaluate --rec " + sim("ground_truth.rgsv").string() + " --gt " +
                  sim("ground_truth.rgsv").string() + " --slices -o " + out.string()),
              0)
        << last_log();
    const auto report = nlohmann::json::parse(rgs::read_text(out / "report.json"));
    EXPECT_EQ(report["psnr_db"].get<double>(), 200.0);
    EXPECT_NEAR(report["ssim"].get<double>(), 1.0, 1e-12);
    EXPECT_TRUE(fs::exists(out / "slice_gt.pgm"));
    EXPECT_NE(run("evaluate --rec " + sim("ground_truth.rgsv").string() + " --gt " +
                  (kWork / "nope.rgsv").string()),
              0);
}

TEST_F(Cli, HfDemoTrajectory) {
    const fs::path out = kWork / "hf.csv";
    ASSERT_EQ(run("demo-hf-suppression --steps 50 -o " + out.string()), 0) << last_log();
    const std::string csv = rgs::read_text(out);
    EXPECT_EQ(csv.rfind("step,density\n0,0.01", 0), 0u);
    EXPECT_NE(csv.find("\n50,0\n"), std::string::npos);
    EXPECT_EQ(run("demo-hf-suppression --target sideways"), 2);
}

TEST_F(Cli, ConfigPrintsDefaults) {
    ASSERT_EQ(run("config"), 0);
    const auto j = nlohmann::json::parse(last_log());
    EXPECT_EQ(j["optimizer"]["total_iters"], 25000);
}
