#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const std::string kBin = PSPSIM_BIN;
const std::string kConfigs = PSPSIM_CONFIG_DIR;

int run(const std::string& args) {
    const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const char* name) {
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

TEST(Cli, VersionAndHelp) {
    EXPECT_EQ(run("--version"), 0);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("simulate --help"), 0);
}

TEST(Cli, SimulateWritesOutputs) {
    const auto dir = fresh_dir("pspsim_cli_sim");
    EXPECT_EQ(run("simulate --config " + kConfigs + "/quick.json --out " +
                  dir.string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "frames.csv"));
    EXPECT_TRUE(fs::exists(dir / "summary.json"));
    EXPECT_TRUE(fs::exists(dir / "calibration.json"));
    EXPECT_TRUE(fs::exists(dir / "figdata" / "fig6b_frames.csv"));
    fs::remove_all(dir);
}

TEST(Cli, ConfigErrorsExitTwo) {
    const auto bad = fs::temp_directory_path() / "pspsim_cli_bad.json";
    std::ofstream(bad) << R"({"transmitter": {"eta0": 2.0}})";
    EXPECT_EQ(run("simulate --config " + bad.string()), 2);
    fs::remove(bad);
    EXPECT_EQ(run("simulate --config /nonexistent.json"), 2);
    EXPECT_EQ(run("simulate"), 2);        // missing required flag
    EXPECT_EQ(run("unknown-subcommand"), 2);
}

TEST(Cli, AnalyzeMissingCalibrationExitsThree) {
    const auto dir = fresh_dir("pspsim_cli_ana");
    EXPECT_EQ(run("analyze --config " + kConfigs + "/quick.json --traces " +
                  dir.string() + " --calibration " + dir.string() +
                  "/missing.json"),
              3);
    fs::remove_all(dir);
}

TEST(Cli, EmitAndAnalyzeRoundTrip) {
    const auto dir = fresh_dir("pspsim_cli_rt");
    ASSERT_EQ(run("simulate --config " + kConfigs +
                  "/quick.json --emit-traces --out " + dir.string()),
              0);
    const auto out2 = fresh_dir("pspsim_cli_rt2");
    EXPECT_EQ(run("analyze --config " + kConfigs + "/quick.json --traces " +
                  (dir / "traces").string() + " --calibration " +
                  (dir / "calibration.json").string() + " --out " +
                  out2.string()),
              0);
    EXPECT_TRUE(fs::exists(out2 / "frames.csv"));
    fs::remove_all(dir);
    fs::remove_all(out2);
}

TEST(Cli, SweepRunsAndRejectsBadAxis) {
    EXPECT_EQ(run("sweep --config " + kConfigs +
                  "/quick.json --axis transmitter.eta1 --values "
                  "0.01,0.1,0.5"),
              0);
    EXPECT_EQ(run("sweep --config " + kConfigs +
                  "/quick.json --axis nope.nope --values 1"),
              2);
}

TEST(Cli, CalibrateWritesRecord) {
    const auto dir = fresh_dir("pspsim_cli_cal");
    EXPECT_EQ(run("calibrate --config " + kConfigs + "/quick.json --out " +
                  dir.string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "calibration.json"));
    fs::remove_all(dir);
}

}  // namespace
