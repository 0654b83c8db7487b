#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tclab/cli.hpp"
#include "tclab/config.hpp"

namespace tclab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "tclab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tclab_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  const fs::path path = dir / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// Short sweep: three hours of warm-up plus a few modulation periods.
const json kShortSweep = json::parse(R"({
  "experiment": {"total_duration": 40800, "seed": 5},
  "grid": [{"delta_t": 0.25, "tau": 1200}, {"delta_t": 0.5, "tau": 600}]
})");

TEST(Cli, NoSubcommandIsUsageError) {
  EXPECT_EQ(invoke({}).code, kExitConfig);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitConfig);
}

TEST(Cli, VersionAndHelpSucceed) {
  EXPECT_EQ(invoke({"--version"}).code, kExitOk);
  EXPECT_EQ(invoke({"run", "--help"}).code, kExitOk);
}

TEST(Cli, ConfigErrorExitCode) {
  const fs::path dir = fresh("config");
  const Result r =
      invoke({"run", "-c", write_config(dir, {{"plant", {{"c_airr", 1}}}}).string(), "-o",
              (dir / "out").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("plant.c_airr"), std::string::npos);
}

TEST(Cli, MissingConfigFileIsIoError) {
  const fs::path dir = fresh("missing");
  EXPECT_EQ(invoke({"run", "-c", (dir / "nope.json").string()}).code, kExitIo);
}

TEST(Cli, SimulationErrorExitCode) {
  const fs::path dir = fresh("sim");
  const json cfg = {{"calibration", {{"target_period_min", 9.0}, {"target_duty", 0.99},
                                     {"fixed", {{"p_comp", 140.0}}}}},
                    {"plant", {{"p_comp", 140.0}}}};
  const Result r = invoke({"calibrate", "-c", write_config(dir, cfg).string(), "-o",
                           (dir / "out").string()});
  EXPECT_EQ(r.code, kExitSimulation) << r.err;
}

TEST(Cli, UnwritableOutputIsIoError) {
  const fs::path dir = fresh("io");
  const Result r = invoke({"run", "-c", write_config(dir, kShortSweep).string(), "-o",
                           "/proc/tclab_cannot_exist"});
  EXPECT_EQ(r.code, kExitIo) << r.err;
}

TEST(Cli, RunThenAnalyze) {
  const fs::path dir = fresh("pipeline");
  const fs::path runs = dir / "runs", ana = dir / "analysis";
  ASSERT_EQ(invoke({"run", "-c", write_config(dir, kShortSweep).string(), "-o", runs.string()})
                .code,
            kExitOk);
  EXPECT_TRUE(fs::exists(runs / "run_000.csv"));
  EXPECT_TRUE(fs::exists(runs / "run_001.csv"));
  const json manifest = json::parse(slurp(runs / "manifest.json"));
  EXPECT_EQ(manifest["runs"].size(), 2u);
  EXPECT_EQ(manifest["software"]["name"], "tclab");
  EXPECT_TRUE(manifest.contains("conventions"));

  const Result a = invoke({"analyze", runs.string(), "-o", ana.string(), "--svg"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_TRUE(fs::exists(ana / "bode.csv"));
  EXPECT_TRUE(fs::exists(ana / "delta_p.csv"));
  EXPECT_TRUE(fs::exists(ana / "economics.json"));
}

TEST(Cli, TruncatedRunFileIsAnalysisError) {
  const fs::path dir = fresh("truncated");
  const fs::path runs = dir / "runs";
  ASSERT_EQ(invoke({"run", "-c", write_config(dir, kShortSweep).string(), "-o", runs.string()})
                .code,
            kExitOk);
  std::string text = slurp(runs / "run_000.csv");
  text.resize(text.rfind('\n', text.size() - 2) + 1);
  std::ofstream(runs / "run_000.csv", std::ios::binary) << text;
  EXPECT_EQ(invoke({"analyze", runs.string(), "-o", (dir / "a").string()}).code, kExitAnalysis);
}

TEST(Cli, ManifestReplaysBitIdentically) {
  const fs::path dir = fresh("replay");
  const fs::path first = dir / "first", second = dir / "second";
  ASSERT_EQ(invoke({"run", "-c", write_config(dir, kShortSweep).string(), "-o", first.string(),
                    "-j", "1"})
                .code,
            kExitOk);
  ASSERT_EQ(invoke({"run", "-c", (first / "manifest.json").string(), "-o", second.string(),
                    "-j", "3"})
                .code,
            kExitOk);
  for (const char* f : {"run_000.csv", "run_001.csv"}) {
    EXPECT_EQ(slurp(first / f), slurp(second / f)) << f;
  }
  // Only the worker count, which never affects results, may differ.
  json a = json::parse(slurp(first / "manifest.json"));
  json b = json::parse(slurp(second / "manifest.json"));
  EXPECT_EQ(a["config"]["workers"], 1);
  EXPECT_EQ(b["config"]["workers"], 3);
  a["config"].erase("workers");
  b["config"].erase("workers");
  EXPECT_EQ(a, b);
}

TEST(Cli, SeedFlagOverridesConfig) {
  const fs::path dir = fresh("seed");
  const fs::path cfg = write_config(dir, kShortSweep);
  ASSERT_EQ(invoke({"run", "-c", cfg.string(), "-o", (dir / "a").string(), "--seed", "9"}).code,
            kExitOk);
  ASSERT_EQ(invoke({"run", "-c", cfg.string(), "-o", (dir / "b").string()}).code, kExitOk);
  const json m = json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(m["config"]["experiment"]["seed"], 9);
  EXPECT_NE(slurp(dir / "a" / "run_000.csv"), slurp(dir / "b" / "run_000.csv"));
}

TEST(Cli, OutputRootFromEnvironment) {
  const fs::path dir = fresh("env");
  ::setenv("TCLAB_OUTPUT_ROOT", (dir / "root").c_str(), 1);
  const Result r = invoke({"run", "-c", write_config(dir, kShortSweep).string()});
  ::unsetenv("TCLAB_OUTPUT_ROOT");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "root" / "run" / "manifest.json"));
}

TEST(Cli, CalibrateWritesParams) {
  const fs::path dir = fresh("calibrate");
  const json cfg = {{"calibration", {{"target_period_min", 9.0}, {"target_duty", 0.34},
                                     {"fixed", {{"ua_wx", 1500.0}}}}}};
  const Result r = invoke({"calibrate", "-c", write_config(dir, cfg).string(), "-o",
                           (dir / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json params = json::parse(slurp(dir / "out" / "params.json"));
  EXPECT_EQ(params["plant"]["ua_wx"], 1500.0);
  EXPECT_GT(params["plant"]["c_air"].get<double>(), 0.0);
}

TEST(Cli, SmallEnsemble) {
  const fs::path dir = fresh("ensemble");
  const json cfg = {{"ensemble", {{"n_units", 12}, {"segments", 1}}}};
  const Result r = invoke({"ensemble", "-c", write_config(dir, cfg).string(), "-o",
                           (dir / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "aggregate.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "ensemble.json"));
}

}  // namespace
}  // namespace tclab
