#include "tclab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tclab/analysis.hpp"
#include "tclab/config.hpp"
#include "tclab/ensemble.hpp"
#include "tclab/error.hpp"
#include "tclab/io.hpp"

namespace tclab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool svg = false;
  std::vector<std::string> inputs;
};

RunConfig resolve_config(const Options& opt) {
  RunConfig cfg = opt.config.empty() ? parse_config(json::object()) : load_config(opt.config);
  if (opt.seed) {
    cfg.experiment.seed = *opt.seed;
    cfg.experiment.noise.seed = *opt.seed;
    cfg.ensemble.seed = *opt.seed;
  }
  if (opt.workers) cfg.workers = *opt.workers;
  if (opt.svg) cfg.analysis.svg = true;
  return cfg;
}

fs::path output_dir(const Options& opt, const RunConfig& cfg, const std::string& command) {
  fs::path dir;
  if (!opt.out.empty()) {
    dir = opt.out;
  } else if (!cfg.output_dir.empty()) {
    dir = cfg.output_dir;
  } else if (const char* root = std::getenv("TCLAB_OUTPUT_ROOT"); root && *root) {
    dir = fs::path(root) / command;
  } else {
    dir = fs::path("tclab_output") / command;
  }
  ensure_directory(dir);
  return dir;
}

json software_json() {
  return {{"name", std::string(kSoftwareName)}, {"version", std::string(kSoftwareVersion)}};
}

std::string point_name(double delta_t, double tau) {
  return "dT" + format_double(delta_t) + "_tau" + format_double(tau);
}

json economics_json(const std::vector<ResponsePoint>& points, const AnalysisConfig& a) {
  json rows = json::array();
  for (const ResponsePoint& p : points) {
    const Economics e = economics(p.magnitude, p.delta_p, a.energy_price, a.regulation_price);
    rows.push_back({{"delta_t", p.delta_t},
                    {"tau", p.tau},
                    {"response_zero_to_peak_w", p.magnitude},
                    {"delta_p_w", p.delta_p},
                    {"cost_per_hour", e.cost_per_hour},
                    {"income_per_hour", e.income_per_hour},
                    {"cost_income_ratio", std::isfinite(e.cost_income_ratio)
                                              ? json(e.cost_income_ratio)
                                              : json("inf")}});
  }
  return {{"energy_price_per_mwh", a.energy_price},
          {"regulation_price_per_mw_h", a.regulation_price},
          {"points", rows}};
}

std::vector<ResponsePoint> sorted_points(std::vector<ResponsePoint> points) {
  std::sort(points.begin(), points.end(), [](const ResponsePoint& a, const ResponsePoint& b) {
    return a.delta_t != b.delta_t ? a.delta_t < b.delta_t : a.tau < b.tau;
  });
  return points;
}

void write_bode_svgs(const fs::path& dir, const std::vector<BodeRow>& rows) {
  std::map<double, PlotSeries> mag, phase;
  for (const BodeRow& r : rows) {
    for (auto* m : {&mag, &phase}) (*m)[r.delta_t].label = "dT=" + format_double(r.delta_t);
    mag[r.delta_t].x.push_back(r.tau / 60.0);
    mag[r.delta_t].y.push_back(r.magnitude);
    phase[r.delta_t].x.push_back(r.tau / 60.0);
    phase[r.delta_t].y.push_back(r.phase_unwrapped);
  }
  PlotSpec m{"First-harmonic magnitude", "tau (min)", "magnitude (W)", true, {}};
  PlotSpec p{"First-harmonic phase", "tau (min)", "phase (deg)", true, {}};
  for (auto& [k, s] : mag) m.series.push_back(s);
  for (auto& [k, s] : phase) p.series.push_back(s);
  write_svg_plot(dir / "bode_magnitude.svg", m);
  write_svg_plot(dir / "bode_phase.svg", p);
}

void write_delta_p_svg(const fs::path& path, const std::vector<ResponsePoint>& points) {
  std::map<double, PlotSeries> by_tau;
  for (const ResponsePoint& p : sorted_points(points)) {
    by_tau[p.tau].label = "tau=" + format_double(p.tau / 60.0) + " min";
    by_tau[p.tau].x.push_back(p.delta_t);
    by_tau[p.tau].y.push_back(p.delta_p);
  }
  PlotSpec plot{"Excess power", "delta T (degC)", "delta P (W)", false, {}};
  for (auto& [k, s] : by_tau) plot.series.push_back(s);
  write_svg_plot(path, plot);
}

void write_cycle_average_svg(const fs::path& path, const CycleAverage& ca,
                             const std::string& title) {
  PlotSeries s{"cycle average", {}, ca.p_avg};
  for (double t : ca.phase_grid) s.x.push_back(t / 60.0);
  write_svg_plot(path, {title, "time in cycle (min)", "p_ac (W)", false, {s}});
}

/// Writes the analysis products for a set of analysed points.
void write_analysis(const fs::path& dir, const std::vector<ResponsePoint>& points,
                    const std::map<std::string, CycleAverage>& averages,
                    const AnalysisConfig& a) {
  const fs::path ca_dir = dir / "cycle_average";
  ensure_directory(ca_dir);
  for (const auto& [name, ca] : averages) {
    write_cycle_average_csv(ca_dir / ("ca_" + name + ".csv"), ca);
    if (a.svg) write_cycle_average_svg(ca_dir / ("ca_" + name + ".svg"), ca, name);
  }
  const std::vector<BodeRow> rows = bode_table(points);
  write_bode_csv(dir / "bode.csv", rows, points);
  write_delta_p_csv(dir / "delta_p.csv", points);
  write_json(dir / "economics.json", economics_json(sorted_points(points), a));
  if (a.svg) {
    write_bode_svgs(dir, rows);
    write_delta_p_svg(dir / "delta_p.svg", points);
  }
}

// ---------------------------------------------------------------- calibrate

int cmd_calibrate(const Options& opt, std::ostream& out) {
  RunConfig cfg = resolve_config(opt);
  if (!cfg.calibration) {
    throw ConfigError("calibration.target_period_min: required field missing");
  }
  const CalibrationTargets& t = *cfg.calibration;
  const fs::path dir = output_dir(opt, cfg, "calibrate");
  ThermostatConfig thermostat = cfg.experiment.thermostat;
  const CalibrationResult r = calibrate(t.target_period_min, t.target_duty, t.fixed,
                                        cfg.experiment.params, thermostat);
  json doc;
  doc["plant"] = plant_to_json(r.params);
  doc["metadata"] = {{"software", software_json()},
                     {"natural_period_min", r.period_min},
                     {"duty", r.duty},
                     {"energy_balance_duty", r.params.balance_duty()},
                     {"residual", r.residual},
                     {"evaluations", r.evaluations},
                     {"target_period_min", t.target_period_min},
                     {"target_duty", t.target_duty},
                     {"dead_band", thermostat.dead_band}};
  write_json(dir / "params.json", doc);
  out << "calibrated: period " << r.period_min << " min, duty " << r.duty << ", residual "
      << r.residual << " (" << r.evaluations << " evaluations)\n"
      << "wrote " << (dir / "params.json").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------- run

json run_entry(std::size_t index, const GridPoint& g, const ExperimentSpec& spec,
               const std::string& file, std::size_t samples) {
  return {{"index", index},
          {"delta_t", g.delta_t},
          {"tau", g.tau},
          {"seed", spec.seed},
          {"file", file},
          {"samples", samples},
          {"effective_segment_length", spec.effective_segment_length()},
          {"segments", spec.segment_count()},
          {"effective_duration", spec.effective_duration()}};
}

int cmd_run(const Options& opt, std::ostream& out) {
  RunConfig cfg = resolve_config(opt);
  const std::vector<GridPoint> grid = cfg.effective_grid();
  validate_grid(grid);
  const fs::path dir = output_dir(opt, cfg, "run");

  std::vector<json> entries(grid.size());
  for_each_sweep_point(grid, cfg.experiment, cfg.workers, [&](std::size_t i, TimeSeries&& ts) {
    std::ostringstream name;
    name << "run_" << std::string(i < 10 ? "00" : i < 100 ? "0" : "") << i << ".csv";
    write_series_csv(dir / name.str(), ts);
    entries[i] = run_entry(i, grid[i], sweep_point_spec(cfg.experiment, grid[i], i), name.str(),
                           ts.size());
  });

  json manifest;
  manifest["software"] = software_json();
  manifest["command"] = "run";
  manifest["config"] = config_to_json(cfg);
  manifest["conventions"] = convention_metadata();
  manifest["runs"] = entries;
  write_json(dir / "manifest.json", manifest);
  out << "wrote " << grid.size() << " run(s) and manifest.json to " << dir.string() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ analyze

int cmd_analyze(const Options& opt, std::ostream& out) {
  if (opt.inputs.empty()) throw ConfigError("analyze: at least one run directory is required");
  std::vector<ResponsePoint> points;
  std::map<std::string, CycleAverage> averages;
  std::optional<RunConfig> first_cfg;

  for (const std::string& input : opt.inputs) {
    const fs::path manifest_path =
        fs::is_directory(input) ? fs::path(input) / "manifest.json" : fs::path(input);
    const json manifest = read_json(manifest_path);
    if (!manifest.contains("runs") || !manifest["runs"].is_array() ||
        !manifest.contains("config")) {
      throw ConfigError(manifest_path.string() + ": not a run manifest");
    }
    const RunConfig cfg = parse_config(manifest["config"]);
    if (!first_cfg) first_cfg = cfg;
    for (const json& run : manifest["runs"]) {
      const fs::path file = manifest_path.parent_path() / run.at("file").get<std::string>();
      TimeSeries ts = read_series_csv(file);
      if (ts.size() != run.at("samples").get<std::size_t>()) {
        std::ostringstream msg;
        msg << file.string() << ": manifest lists " << run.at("samples").get<std::size_t>()
            << " samples, file has " << ts.size();
        throw AnalysisError(msg.str());
      }
      ts.tau = run.at("tau").get<double>();
      ts.delta_t = run.at("delta_t").get<double>();
      ts.t_avg = cfg.experiment.thermostat.t_avg;
      try {
        const ResponsePoint p = analyze_series(ts, cfg.experiment.params.eta);
        averages[point_name(p.delta_t, p.tau)] = cycle_average(ts, ts.tau);
        points.push_back(p);
      } catch (const AnalysisError& e) {
        throw AnalysisError(file.string() + ": " + e.what());
      }
    }
  }

  RunConfig cfg = *first_cfg;
  if (!opt.config.empty()) cfg.analysis = load_config(opt.config).analysis;
  if (opt.svg) cfg.analysis.svg = true;
  const fs::path dir = output_dir(opt, RunConfig{}, "analyze");
  write_analysis(dir, points, averages, cfg.analysis);
  for (const ResponsePoint& p : sorted_points(points)) {
    out << "dT=" << p.delta_t << " tau=" << p.tau << "s: |P1|=" << p.magnitude
        << " W phase=" << p.phase << " deg dP=" << p.delta_p << " W\n";
  }
  out << "wrote analysis to " << dir.string() << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- ensemble

struct EnsembleOutcome {
  EnsembleResult result;
  std::optional<EnsembleComparison> comparison;
  int single_cycles = 0;
};

EnsembleSpec ensemble_spec(const RunConfig& cfg) {
  EnsembleSpec es;
  es.n_units = cfg.ensemble.n_units;
  es.base = cfg.experiment;
  es.init = cfg.ensemble.init;
  es.seed = cfg.ensemble.seed;
  es.segments = cfg.ensemble.segments;
  es.workers = cfg.workers;
  return es;
}

EnsembleOutcome run_ensemble_study(const RunConfig& cfg) {
  EnsembleOutcome o;
  o.result = run_ensemble(ensemble_spec(cfg));
  if (cfg.ensemble.compare_single && o.result.cycle_average) {
    const ExperimentSpec single =
        matched_single_spec(cfg.experiment, o.result.cycle_average->n_cycles);
    const CycleAverage ca = cycle_average(run_experiment(single), single.tau);
    o.single_cycles = ca.n_cycles;
    o.comparison = compare_single_vs_ensemble(ca, *o.result.cycle_average, cfg.ensemble.n_sigma);
  }
  return o;
}

json ensemble_json(const RunConfig& cfg, const EnsembleOutcome& o) {
  json doc = {{"n_units", cfg.ensemble.n_units},
              {"natural_period_s", o.result.natural_period},
              {"mean_p_ac_w", 0.0},
              {"ripple_w", aggregate_ripple(o.result.aggregate)}};
  double sum = 0.0;
  for (double v : o.result.aggregate.p_ac) sum += v;
  doc["mean_p_ac_w"] = sum / static_cast<double>(o.result.aggregate.size());
  if (o.comparison) {
    doc["comparison"] = {{"rms_diff_w", o.comparison->rms_diff},
                         {"tolerance_w", o.comparison->tolerance},
                         {"n_sigma", cfg.ensemble.n_sigma},
                         {"pass", o.comparison->pass},
                         {"single_cycles", o.single_cycles},
                         {"ensemble_unit_cycles", o.result.cycle_average->n_cycles}};
  }
  return doc;
}

int cmd_ensemble(const Options& opt, std::ostream& out) {
  RunConfig cfg = resolve_config(opt);
  const fs::path dir = output_dir(opt, cfg, "ensemble");
  const EnsembleOutcome o = run_ensemble_study(cfg);
  write_series_csv(dir / "aggregate.csv", o.result.aggregate);
  if (o.result.cycle_average) {
    write_cycle_average_csv(dir / "ensemble_cycle_average.csv", *o.result.cycle_average);
  }
  const json summary = ensemble_json(cfg, o);
  write_json(dir / "ensemble.json", summary);
  json manifest;
  manifest["software"] = software_json();
  manifest["command"] = "ensemble";
  manifest["config"] = config_to_json(cfg);
  manifest["conventions"] = convention_metadata();
  write_json(dir / "manifest.json", manifest);
  out << "ensemble of " << cfg.ensemble.n_units << ": ripple " << summary["ripple_w"].get<double>()
      << " W";
  if (o.comparison) {
    out << ", single vs ensemble rms " << o.comparison->rms_diff << " W (tolerance "
        << o.comparison->tolerance << " W) " << (o.comparison->pass ? "PASS" : "FAIL");
  }
  out << "\nwrote " << dir.string() << '\n';
  return kExitOk;
}

// -------------------------------------------------------- reproduce-figures

struct SweepAnalysis {
  std::vector<ResponsePoint> points;
  std::map<std::string, CycleAverage> averages;
};

SweepAnalysis analyze_sweep(const std::vector<GridPoint>& grid, const RunConfig& cfg) {
  SweepAnalysis s;
  std::mutex mutex;
  for_each_sweep_point(grid, cfg.experiment, cfg.workers, [&](std::size_t, TimeSeries&& ts) {
    const ResponsePoint p = analyze_series(ts, cfg.experiment.params.eta);
    CycleAverage ca = cycle_average(ts, ts.tau);
    std::lock_guard lock(mutex);
    s.points.push_back(p);
    s.averages[point_name(p.delta_t, p.tau)] = std::move(ca);
  });
  s.points = sorted_points(std::move(s.points));
  return s;
}

int cmd_reproduce(const Options& opt, std::ostream& out) {
  RunConfig cfg = resolve_config(opt);
  const fs::path dir = output_dir(opt, cfg, "figures");
  const double eta = cfg.experiment.params.eta;
  json summary;
  summary["software"] = software_json();
  summary["config"] = config_to_json(cfg);
  summary["conventions"] = convention_metadata();

  ThermostatConfig quiet = cfg.experiment.thermostat;
  const CycleStats stats = measure_cycles(cfg.experiment.params, quiet);
  summary["natural_period_min"] = stats.period / 60.0;
  summary["duty"] = stats.duty;
  summary["energy_balance_duty"] = cfg.experiment.params.balance_duty();
  out << "natural period " << stats.period / 60.0 << " min, duty " << stats.duty << '\n';

  // Raw traces around the first modulated segments.
  {
    ExperimentSpec spec = cfg.experiment;
    spec.delta_t = 0.25;
    spec.tau = 1200.0;
    TimeSeries ts = run_experiment(spec);
    const auto begin = static_cast<std::size_t>(spec.warmup_discard - 1800.0);
    const auto end = std::min(ts.size(), static_cast<std::size_t>(
                                             spec.warmup_discard +
                                             4.0 * spec.effective_segment_length()));
    TimeSeries window = ts;
    auto cut = [&](auto& v) { v = std::vector(v.begin() + begin, v.begin() + end); };
    cut(window.p_ac), cut(window.t_air), cut(window.t_water), cut(window.setpoint);
    cut(window.q_heater), cut(window.compressor_on), cut(window.segment);
    write_series_csv(dir / "trace.csv", window);
    if (cfg.analysis.svg) {
      PlotSeries air{"t_air", {}, window.t_air}, sp{"setpoint", {}, window.setpoint};
      for (std::size_t i = 0; i < window.size(); ++i) {
        air.x.push_back((static_cast<double>(begin + i)) / 3600.0);
      }
      sp.x = air.x;
      write_svg_plot(dir / "trace.svg",
                     {"Set point and air temperature", "time (h)", "degC", false, {sp, air}});
    }
    out << "trace: written\n";
  }

  // Cycle-averaged waveforms on a 3x3 grid.
  {
    std::vector<GridPoint> grid;
    for (double dt : {0.0625, 0.125, 0.25}) {
      for (double tau : {180.0, 600.0, 1200.0}) grid.push_back({dt, tau});
    }
    const SweepAnalysis s = analyze_sweep(grid, cfg);
    const fs::path sub = dir / "waveforms";
    ensure_directory(sub);
    for (const auto& [name, ca] : s.averages) {
      write_cycle_average_csv(sub / ("ca_" + name + ".csv"), ca);
      if (cfg.analysis.svg) write_cycle_average_svg(sub / ("ca_" + name + ".svg"), ca, name);
    }
    out << "waveforms: " << s.averages.size() << " cycle averages\n";
  }

  // Frequency response, excess power and economics.
  {
    std::vector<GridPoint> grid;
    for (double dt : {0.125, 0.25, 0.375, 0.5}) {
      for (double tau_min : {3.0, 5.0, 7.0, 9.0, 12.0, 20.0, 30.0, 40.0}) {
        grid.push_back({dt, tau_min * 60.0});
      }
    }
    const SweepAnalysis s = analyze_sweep(grid, cfg);
    const fs::path sub = dir / "response";
    write_analysis(sub, s.points, s.averages, cfg.analysis);
    std::vector<ResponsePoint> cost;
    for (const ResponsePoint& p : s.points) {
      if (p.tau == 1200.0) cost.push_back(p);
    }
    write_delta_p_csv(dir / "cost_delta_p.csv", cost);
    if (cfg.analysis.svg) write_delta_p_svg(dir / "cost_delta_p.svg", cost);
    json dp = json::array();
    for (const ResponsePoint& p : cost) dp.push_back({{"delta_t", p.delta_t}, {"delta_p_w", p.delta_p}});
    summary["cost_delta_p"] = dp;

    const Economics reference = economics(100.0, 10.0, 200.0, 40.0);
    summary["economics_reference"] = {{"response_zero_to_peak_w", 100.0},
                                      {"delta_p_w", 10.0},
                                      {"cost_per_hour", reference.cost_per_hour},
                                      {"income_per_hour", reference.income_per_hour},
                                      {"cost_income_ratio", reference.cost_income_ratio}};
    write_json(dir / "economics.json", economics_json(cost, cfg.analysis));
    out << "response: " << s.points.size() << " points\n";
  }

  // Single unit against an ensemble.
  {
    RunConfig ecfg = cfg;
    ecfg.experiment.delta_t = 0.25;
    ecfg.experiment.tau = 1200.0;
    ecfg.ensemble.segments = 1;
    const EnsembleOutcome o = run_ensemble_study(ecfg);
    summary["ensemble"] = ensemble_json(ecfg, o);
    out << "ensemble: " << (o.comparison && o.comparison->pass ? "equivalent" : "NOT equivalent")
        << '\n';
  }

  summary["eta"] = eta;
  write_json(dir / "summary.json", summary);
  out << "wrote " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Window air-conditioner regulation test bed simulator", "tclab"};
  app.set_version_flag("--version", std::string(kSoftwareVersion));
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("-c,--config", opt.config, "JSON config or run manifest");
    if (needs_config) c->required();
    sub->add_option("-o,--out", opt.out, "Output directory (default $TCLAB_OUTPUT_ROOT/<command>)");
    sub->add_option("--seed", opt.seed, "Override experiment and ensemble seeds");
    sub->add_option("-j,--workers", opt.workers, "Worker threads (0 = all cores)");
  };

  CLI::App* cal = app.add_subcommand("calibrate", "Fit plant parameters to a period and duty");
  common(cal, true);
  CLI::App* run = app.add_subcommand("run", "Run one experiment or a sweep and write CSV files");
  common(run, false);
  CLI::App* analyze = app.add_subcommand("analyze", "Analyse run directories");
  analyze->add_option("inputs", opt.inputs, "Run directories or manifest files")->required();
  analyze->add_option("-c,--config", opt.config, "Config supplying analysis prices");
  analyze->add_option("-o,--out", opt.out, "Output directory");
  analyze->add_flag("--svg", opt.svg, "Also write SVG plots");
  CLI::App* ens = app.add_subcommand("ensemble", "Simulate an ensemble of units");
  common(ens, false);
  CLI::App* fig = app.add_subcommand("reproduce-figures", "Regenerate all figure data");
  common(fig, false);
  fig->add_flag("--svg", opt.svg, "Also write SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*cal) return cmd_calibrate(opt, out);
    if (*run) return cmd_run(opt, out);
    if (*analyze) return cmd_analyze(opt, out);
    if (*ens) return cmd_ensemble(opt, out);
    if (*fig) return cmd_reproduce(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SimulationError& e) {
    err << "simulation error: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const AnalysisError& e) {
    err << "analysis error: " << e.what() << '\n';
    return kExitAnalysis;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace tclab
