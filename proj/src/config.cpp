#include "tclab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "tclab/error.hpp"
#include "tclab/noise.hpp"

namespace tclab {

using nlohmann::json;

namespace {

// Reads members of one JSON object, remembering which keys were consumed so
// leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const char* key) const { return doc_.contains(key); }

  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(name(key), "expected a number");
      out = v->get<double>();
    }
  }

  void flag(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(name(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  template <typename T>
  void count(const char* key, T& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        fail(name(key), "expected a non-negative integer");
      }
      out = static_cast<T>(v->get<std::uint64_t>());
    }
  }

  void text(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(name(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void required(const char* key) const {
    if (!doc_.contains(key)) fail(name(key), "required field missing");
  }

  const json* take(const char* key) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::optional<Fields> object(const char* key) {
    if (const json* v = take(key)) return Fields(*v, name(key));
    return std::nullopt;
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) fail(name(it.key()), "unknown field");
    }
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a validator and prefixes its message with the section name.
template <typename F>
void checked(const std::string& section, F&& validate) {
  try {
    validate();
  } catch (const ConfigError& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

void parse_plant(Fields f, PlantParams& p, bool& t_shell_given) {
  f.number("c_air", p.c_air);
  f.number("c_water", p.c_water);
  f.number("ua_wx", p.ua_wx);
  f.number("ua_shell", p.ua_shell);
  t_shell_given = f.has("t_shell");
  f.number("t_shell", p.t_shell);
  f.number("q_heater_mean", p.q_heater_mean);
  f.number("p_pump", p.p_pump);
  f.number("p_fan", p.p_fan);
  f.number("p_comp", p.p_comp);
  f.number("p_acfan", p.p_acfan);
  f.number("eta", p.eta);
  f.number("acfan_inside_fraction", p.acfan_inside_fraction);
  f.number("air_heat_fraction", p.air_heat_fraction);
  f.finish();
}

void parse_noise(Fields f, NoiseConfig& n) {
  f.number("amplitude", n.amplitude);
  f.number("mean_hold", n.mean_hold);
  f.flag("enabled", n.enabled);
  std::string shape;
  f.text("shape", shape);
  if (shape == "uniform") {
    n.shape = NoiseShape::uniform;
  } else if (shape == "binary") {
    n.shape = NoiseShape::binary;
  } else if (!shape.empty()) {
    Fields::fail(f.name("shape"), "expected \"uniform\" or \"binary\"");
  }
  std::string rng;
  f.text("rng", rng);
  if (!rng.empty() && rng != kRngAlgorithm) {
    Fields::fail(f.name("rng"), "only " + std::string(kRngAlgorithm) + " is available");
  }
  f.finish();
}

GridPoint parse_grid_point(Fields f) {
  GridPoint g{};
  f.required("delta_t");
  f.required("tau");
  f.number("delta_t", g.delta_t);
  f.number("tau", g.tau);
  f.finish();
  return g;
}

std::optional<double> optional_number(Fields& f, const char* key) {
  if (!f.has(key)) return std::nullopt;
  double v = 0.0;
  f.number(key, v);
  return v;
}

}  // namespace

std::vector<GridPoint> RunConfig::effective_grid() const {
  if (!grid.empty()) return grid;
  return {GridPoint{experiment.delta_t, experiment.tau}};
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  Fields top(doc, "");
  top.take("metadata");  // free-form, ignored

  ExperimentSpec& ex = cfg.experiment;
  bool t_shell_given = false;
  if (auto f = top.object("plant")) parse_plant(*f, ex.params, t_shell_given);
  if (auto f = top.object("thermostat")) {
    f->number("t_avg", ex.thermostat.t_avg);
    f->number("dead_band", ex.thermostat.dead_band);
    f->finish();
  }
  if (!t_shell_given) ex.params.t_shell = ex.thermostat.t_avg;
  if (auto f = top.object("noise")) parse_noise(*f, ex.noise);
  if (auto f = top.object("experiment")) {
    f->number("delta_t", ex.delta_t);
    f->number("tau", ex.tau);
    f->number("total_duration", ex.total_duration);
    f->number("segment_length", ex.segment_length);
    f->number("warmup_discard", ex.warmup_discard);
    f->number("dt", ex.dt);
    f->count("seed", ex.seed);
    f->finish();
  }
  ex.noise.seed = ex.seed;

  if (const json* grid = top.take("grid")) {
    if (!grid->is_array()) Fields::fail("grid", "expected an array of {delta_t, tau}");
    for (std::size_t i = 0; i < grid->size(); ++i) {
      cfg.grid.push_back(parse_grid_point(Fields((*grid)[i], "grid[" + std::to_string(i) + "]")));
    }
    if (cfg.grid.empty()) Fields::fail("grid", "must not be empty");
  }

  if (auto f = top.object("calibration")) {
    CalibrationTargets t;
    f->required("target_period_min");
    f->required("target_duty");
    f->number("target_period_min", t.target_period_min);
    f->number("target_duty", t.target_duty);
    if (auto fixed = f->object("fixed")) {
      t.fixed.c_air = optional_number(*fixed, "c_air");
      t.fixed.ua_wx = optional_number(*fixed, "ua_wx");
      t.fixed.p_comp = optional_number(*fixed, "p_comp");
      fixed->finish();
    }
    f->finish();
    if (!(t.target_period_min > 0.0)) {
      Fields::fail("calibration.target_period_min", "must be > 0");
    }
    if (!(t.target_duty > 0.0 && t.target_duty < 1.0)) {
      Fields::fail("calibration.target_duty", "must lie in (0, 1)");
    }
    cfg.calibration = t;
  }

  if (auto f = top.object("ensemble")) {
    EnsembleConfig& e = cfg.ensemble;
    f->count("n_units", e.n_units);
    f->count("segments", e.segments);
    f->count("seed", e.seed);
    f->number("n_sigma", e.n_sigma);
    f->flag("compare_single", e.compare_single);
    if (auto init = f->object("init")) {
      init->number("t_air_spread", e.init.t_air_spread);
      init->number("t_water_spread", e.init.t_water_spread);
      init->flag("random_relay", e.init.random_relay);
      init->flag("random_pre_run", e.init.random_pre_run);
      init->finish();
    }
    f->finish();
    if (!(e.n_sigma > 0.0)) Fields::fail("ensemble.n_sigma", "must be > 0");
  }

  if (auto f = top.object("analysis")) {
    f->number("energy_price", cfg.analysis.energy_price);
    f->number("regulation_price", cfg.analysis.regulation_price);
    f->flag("svg", cfg.analysis.svg);
    f->finish();
    if (cfg.analysis.energy_price < 0.0) Fields::fail("analysis.energy_price", "must be >= 0");
    if (cfg.analysis.regulation_price < 0.0) {
      Fields::fail("analysis.regulation_price", "must be >= 0");
    }
  }

  if (auto f = top.object("output")) {
    f->text("dir", cfg.output_dir);
    f->finish();
  }
  top.count("workers", cfg.workers);
  top.finish();

  checked("plant", [&] { ex.params.validate(); });
  checked("noise", [&] { ex.noise.validate(); });
  checked("experiment", [&] { ex.validate(); });
  checked("grid", [&] { validate_grid(cfg.effective_grid()); });
  for (const GridPoint& g : cfg.grid) {
    checked("grid", [&] {
      ExperimentSpec probe = ex;
      probe.delta_t = g.delta_t;
      probe.tau = g.tau;
      probe.validate();
    });
  }
  checked("ensemble", [&] {
    EnsembleSpec probe;
    probe.base = ex;
    probe.n_units = cfg.ensemble.n_units;
    probe.segments = cfg.ensemble.segments;
    probe.init = cfg.ensemble.init;
    probe.validate();
  });
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  json doc = read_json(path);
  if (doc.is_object() && doc.contains("software") && doc.contains("config")) {
    return parse_config(doc["config"]);
  }
  return parse_config(doc);
}

json plant_to_json(const PlantParams& p) {
  return {{"c_air", p.c_air},
          {"c_water", p.c_water},
          {"ua_wx", p.ua_wx},
          {"ua_shell", p.ua_shell},
          {"t_shell", p.t_shell},
          {"q_heater_mean", p.q_heater_mean},
          {"p_pump", p.p_pump},
          {"p_fan", p.p_fan},
          {"p_comp", p.p_comp},
          {"p_acfan", p.p_acfan},
          {"eta", p.eta},
          {"acfan_inside_fraction", p.acfan_inside_fraction},
          {"air_heat_fraction", p.air_heat_fraction}};
}

json config_to_json(const RunConfig& cfg) {
  const ExperimentSpec& ex = cfg.experiment;
  json doc;
  doc["plant"] = plant_to_json(ex.params);
  doc["thermostat"] = {{"t_avg", ex.thermostat.t_avg}, {"dead_band", ex.thermostat.dead_band}};
  doc["noise"] = {{"amplitude", ex.noise.amplitude},
                  {"mean_hold", ex.noise.mean_hold},
                  {"enabled", ex.noise.enabled},
                  {"shape", ex.noise.shape == NoiseShape::uniform ? "uniform" : "binary"},
                  {"rng", std::string(kRngAlgorithm)}};
  doc["experiment"] = {{"delta_t", ex.delta_t},
                       {"tau", ex.tau},
                       {"total_duration", ex.total_duration},
                       {"segment_length", ex.segment_length},
                       {"warmup_discard", ex.warmup_discard},
                       {"dt", ex.dt},
                       {"seed", ex.seed}};
  if (!cfg.grid.empty()) {
    json grid = json::array();
    for (const GridPoint& g : cfg.grid) grid.push_back({{"delta_t", g.delta_t}, {"tau", g.tau}});
    doc["grid"] = grid;
  }
  if (cfg.calibration) {
    const CalibrationTargets& t = *cfg.calibration;
    json fixed = json::object();
    if (t.fixed.c_air) fixed["c_air"] = *t.fixed.c_air;
    if (t.fixed.ua_wx) fixed["ua_wx"] = *t.fixed.ua_wx;
    if (t.fixed.p_comp) fixed["p_comp"] = *t.fixed.p_comp;
    doc["calibration"] = {{"target_period_min", t.target_period_min},
                          {"target_duty", t.target_duty},
                          {"fixed", fixed}};
  }
  const EnsembleConfig& e = cfg.ensemble;
  doc["ensemble"] = {{"n_units", e.n_units},
                     {"segments", e.segments},
                     {"seed", e.seed},
                     {"n_sigma", e.n_sigma},
                     {"compare_single", e.compare_single},
                     {"init",
                      {{"t_air_spread", e.init.t_air_spread},
                       {"t_water_spread", e.init.t_water_spread},
                       {"random_relay", e.init.random_relay},
                       {"random_pre_run", e.init.random_pre_run}}}};
  doc["analysis"] = {{"energy_price", cfg.analysis.energy_price},
                     {"regulation_price", cfg.analysis.regulation_price},
                     {"svg", cfg.analysis.svg}};
  if (!cfg.output_dir.empty()) doc["output"] = {{"dir", cfg.output_dir}};
  doc["workers"] = cfg.workers;
  return doc;
}

json convention_metadata() {
  return {
      {"rng_algorithm", std::string(kRngAlgorithm)},
      {"uniform_variate", "top 53 bits of each 64-bit output times 2^-53"},
      {"seed_derivation",
       "grid point i uses splitmix64(experiment.seed, i); a run without a grid uses "
       "experiment.seed; ensemble unit i uses splitmix64(ensemble.seed, i)"},
      {"noise_offset_distribution", "uniform on [-amplitude, +amplitude] (binary: +/-amplitude)"},
      {"noise_hold_distribution", "exponential with mean mean_hold, hold = -mean*log(1-u)"},
      {"integrator", "classical RK4; relay edge crossings located inside the step by Brent root finding and integration restarted there"},
      {"sample_interval_s", 1.0},
      {"sample_semantics", "row i holds the state at t=i and the relay/heater input over [i, i+1)"},
      {"modulation_phase", "sin phase reset to zero at the start of every modulated segment"},
      {"phase_convention",
       "phase of the power first harmonic minus set-point phase, degrees in (-180, 180]; "
       "negative lags the set point; unwrapped copy continuous from the longest tau"},
      {"power_channel", "p_ac = p_acfan + on * p_comp"},
  };
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace tclab
