#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "tclab/analysis.hpp"
#include "tclab/config.hpp"
#include "tclab/error.hpp"
#include "tclab/io.hpp"

namespace tclab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tclab_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 24.272000000000002, 1e-300, 6.02e23,
                   std::nextafter(1.0, 2.0)}) {
    EXPECT_EQ(parse_double(format_double(v)), v) << format_double(v);
  }
  EXPECT_EQ(format_double(50.0), "50");
}

TEST(ParseDouble, RejectsGarbage) {
  EXPECT_THROW(parse_double("1.5x"), IoError);
  EXPECT_THROW(parse_double(""), IoError);
  EXPECT_EQ(parse_double("+3"), 3.0);
  EXPECT_TRUE(std::isnan(parse_double("nan")));
}

TEST(SeriesCsv, LosslessRoundTrip) {
  ExperimentSpec s;
  s.delta_t = 0.25;
  s.total_duration = 10800.0 + 5 * 6000.0;
  const TimeSeries ts = run_experiment(s);
  const fs::path dir = scratch_dir("csv");
  write_series_csv(dir / "run.csv", ts);
  TimeSeries back = read_series_csv(dir / "run.csv");
  back.tau = ts.tau;
  back.delta_t = ts.delta_t;
  back.t_avg = ts.t_avg;
  EXPECT_TRUE(back == ts);

  std::ifstream in(dir / "run.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "time_s,p_ac_w,t_air_c,t_water_c,setpoint_c,q_heater_w,on,segment");
}

TEST(SeriesCsv, BadFilesReportIoError) {
  const fs::path dir = scratch_dir("badcsv");
  EXPECT_THROW(read_series_csv(dir / "missing.csv"), IoError);
  {
    std::ofstream(dir / "header.csv") << "a,b\n1,2\n";
  }
  EXPECT_THROW(read_series_csv(dir / "header.csv"), IoError);
  {
    std::ofstream(dir / "row.csv") << kSeriesHeader << "\n0,1,2,3,4,5,0,mod\n1,1,2,3\n";
  }
  EXPECT_THROW(read_series_csv(dir / "row.csv"), IoError);
  {
    std::ofstream(dir / "label.csv") << kSeriesHeader << "\n0,1,2,3,4,5,0,sideways\n";
  }
  EXPECT_THROW(read_series_csv(dir / "label.csv"), IoError);
}

TEST(Svg, WritesWellFormedDocument) {
  const fs::path dir = scratch_dir("svg");
  PlotSpec plot{"t", "x", "y", true, {{"a", {1, 10, 100}, {1, 2, std::nan("")}}}};
  write_svg_plot(dir / "p.svg", plot);
  std::ifstream in(dir / "p.svg");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_NE(text.find("</svg>"), std::string::npos);
  EXPECT_EQ(text.find("nan"), std::string::npos);
}

TEST(EnsureDirectory, UnwritablePathThrows) {
  EXPECT_THROW(ensure_directory("/proc/tclab_cannot_exist"), IoError);
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const RunConfig c = parse_config(json::object());
  EXPECT_EQ(c.experiment.tau, 1200.0);
  EXPECT_EQ(c.experiment.total_duration, 302400.0);
  EXPECT_EQ(c.experiment.params.c_air, default_plant_params().c_air);
  EXPECT_EQ(c.experiment.params.t_shell, 24.0);
  EXPECT_EQ(c.effective_grid().size(), 1u);
}

TEST(Config, ShellFollowsAverageSetpointUnlessGiven) {
  EXPECT_EQ(parse_config(json::parse(R"({"thermostat": {"t_avg": 22}})"))
                .experiment.params.t_shell,
            22.0);
  EXPECT_EQ(parse_config(json::parse(R"({"thermostat": {"t_avg": 22}, "plant": {"t_shell": 25}})"))
                .experiment.params.t_shell,
            25.0);
}

void expect_config_error(const char* doc, const std::string& field) {
  try {
    parse_config(json::parse(doc));
    ADD_FAILURE() << "no error for " << doc;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(field), std::string::npos)
        << "message '" << e.what() << "' lacks " << field;
  }
}

TEST(Config, ErrorsNameTheField) {
  expect_config_error(R"({"plant": {"c_airr": 1}})", "plant.c_airr");
  expect_config_error(R"({"experiment": {"tau": "slow"}})", "experiment.tau");
  expect_config_error(R"({"experiment": {"seed": -4}})", "experiment.seed");
  expect_config_error(R"({"noise": {"shape": "pink"}})", "noise.shape");
  expect_config_error(R"({"noise": {"rng": "pcg"}})", "noise.rng");
  expect_config_error(R"({"grid": [{"delta_t": 0.25}]})", "grid[0].tau");
  expect_config_error(R"({"grid": []})", "grid");
  expect_config_error(R"({"calibration": {"target_period_min": 9}})",
                      "calibration.target_duty");
  expect_config_error(R"({"calibration": {"target_period_min": 9, "target_duty": 1.5}})",
                      "calibration.target_duty");
  expect_config_error(R"({"plant": {"p_comp": 100}})", "plant");
  expect_config_error(R"({"bogus": 1})", "bogus");
  expect_config_error(R"([1, 2])", "config");
}

TEST(Config, DuplicateGridRejectedBeforeExecution) {
  expect_config_error(R"({"grid": [{"delta_t": 0.25, "tau": 1200}, {"delta_t": 0.25, "tau": 1200}]})",
                      "duplicate");
}

TEST(Config, ResolvedEchoReparsesToSameConfig) {
  const RunConfig a = parse_config(json::parse(R"({
    "plant": {"c_air": 123456.789, "p_comp": 401},
    "experiment": {"delta_t": 0.375, "seed": 18446744073709551615},
    "grid": [{"delta_t": 0.125, "tau": 540}],
    "calibration": {"target_period_min": 9, "target_duty": 0.34, "fixed": {"ua_wx": 1500}},
    "ensemble": {"n_units": 20, "init": {"random_relay": false}},
    "analysis": {"svg": true}
  })"));
  const json echo = config_to_json(a);
  const RunConfig b = parse_config(echo);
  EXPECT_EQ(config_to_json(b), echo);
  EXPECT_EQ(b.experiment.seed, 18446744073709551615ULL);
  EXPECT_EQ(b.experiment.params.c_air, 123456.789);
  EXPECT_EQ(b.calibration->fixed.ua_wx, 1500.0);
  EXPECT_FALSE(b.calibration->fixed.c_air.has_value());
  EXPECT_FALSE(b.ensemble.init.random_relay);
}

TEST(Config, ManifestLoadsItsConfig) {
  const fs::path dir = scratch_dir("manifest");
  RunConfig c = parse_config(json::parse(R"({"experiment": {"delta_t": 0.5}})"));
  write_json(dir / "manifest.json", {{"software", "x"}, {"config", config_to_json(c)}});
  EXPECT_EQ(load_config(dir / "manifest.json").experiment.delta_t, 0.5);
}

TEST(Config, MalformedJsonIsConfigError) {
  const fs::path dir = scratch_dir("malformed");
  { std::ofstream(dir / "c.json") << "{ not json"; }
  EXPECT_THROW(load_config(dir / "c.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "absent.json"), IoError);
}

TEST(Config, MetadataNamesConventions) {
  const json m = convention_metadata();
  EXPECT_EQ(m["rng_algorithm"], "mt19937_64");
  EXPECT_TRUE(m.contains("phase_convention"));
  EXPECT_TRUE(m.contains("noise_offset_distribution"));
  EXPECT_TRUE(m.contains("noise_hold_distribution"));
}

}  // namespace
}  // namespace tclab
