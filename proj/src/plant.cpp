#include "tclab/plant.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_roots.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "tclab/error.hpp"

namespace tclab {

void PlantParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("plant.") + name + " must be finite and > 0");
    }
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("plant.") + name + " must be finite and >= 0");
    }
  };
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string("plant.") + name + " must lie in [0, 1]");
    }
  };
  positive(c_air, "c_air");
  positive(c_water, "c_water");
  non_negative(ua_wx, "ua_wx");
  non_negative(ua_shell, "ua_shell");
  positive(eta, "eta");
  positive(p_comp, "p_comp");
  non_negative(q_heater_mean, "q_heater_mean");
  non_negative(p_pump, "p_pump");
  non_negative(p_fan, "p_fan");
  non_negative(p_acfan, "p_acfan");
  fraction(acfan_inside_fraction, "acfan_inside_fraction");
  fraction(air_heat_fraction, "air_heat_fraction");
  if (!std::isfinite(t_shell)) throw ConfigError("plant.t_shell must be finite");
  if (!(internal_load() < extraction())) {
    std::ostringstream msg;
    msg << "plant cannot overcome its heat load: q_heater_mean + p_pump + p_fan = "
        << internal_load() << " W but eta * p_comp = " << extraction() << " W";
    throw ConfigError(msg.str());
  }
}

PlantParams default_plant_params() {
  PlantParams p;
  // calibrate(9 min, 408 / 1200) with ua_wx pinned at 1500 W/degC, started
  // from the struct defaults, tolerance 1e-7.
  p.c_air = 227420.91245379095;
  p.p_comp = 399.80078460559082;
  return p;
}

Rates derivatives(const SimState& state, const PlantParams& params) {
  const double internal = params.q_heater_mean + state.q_noise + params.p_pump + params.p_fan;
  const double exchanger = params.ua_wx * (state.t_water - state.t_air);
  const double envelope = params.ua_shell * (params.t_shell - state.t_air);
  const double cooling = state.compressor_on ? params.eta * params.p_comp : 0.0;
  const double to_air =
      params.air_heat_fraction * internal + params.acfan_inside_fraction * params.p_acfan;
  const double to_water = (1.0 - params.air_heat_fraction) * internal;
  return {(exchanger + envelope - cooling + to_air) / params.c_air,
          (to_water - exchanger) / params.c_water};
}

namespace {

// One classical RK4 step of length h with the relay held fixed.
SimState rk4(const SimState& state, const PlantParams& params, double h) {
  auto at = [&](double da, double dw) {
    SimState s = state;
    s.t_air += da;
    s.t_water += dw;
    return s;
  };
  const Rates k1 = derivatives(state, params);
  const Rates k2 = derivatives(at(0.5 * h * k1.d_air, 0.5 * h * k1.d_water), params);
  const Rates k3 = derivatives(at(0.5 * h * k2.d_air, 0.5 * h * k2.d_water), params);
  const Rates k4 = derivatives(at(h * k3.d_air, h * k3.d_water), params);
  SimState next = state;
  next.t = state.t + h;
  next.t_air += h / 6.0 * (k1.d_air + 2.0 * k2.d_air + 2.0 * k3.d_air + k4.d_air);
  next.t_water += h / 6.0 * (k1.d_water + 2.0 * k2.d_water + 2.0 * k3.d_water + k4.d_water);
  return next;
}

// Distance past the edge that would flip the relay; >= 0 means it flips.
double switching_margin(const SimState& s, const ThermostatConfig& thermostat) {
  const DeadBand edges = dead_band_edges(s.t, thermostat);
  return s.compressor_on ? edges.lower - s.t_air : s.t_air - edges.upper;
}

struct CrossingProblem {
  const SimState* start;
  const PlantParams* params;
  const ThermostatConfig* thermostat;
};

double crossing_margin(double h, void* data) {
  const auto* c = static_cast<const CrossingProblem*>(data);
  return switching_margin(rk4(*c->start, *c->params, h), *c->thermostat);
}

// Time into the step at which the relay edge is reached, given that the
// margin is negative at 0 and non-negative at `h_max`.
double locate_crossing(const SimState& start, const PlantParams& params,
                       const ThermostatConfig& thermostat, double h_max) {
  CrossingProblem problem{&start, &params, &thermostat};
  gsl_function f{&crossing_margin, &problem};
  std::unique_ptr<gsl_root_fsolver, decltype(&gsl_root_fsolver_free)> solver(
      gsl_root_fsolver_alloc(gsl_root_fsolver_brent), &gsl_root_fsolver_free);
  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  double lo = 0.0, hi = h_max;
  if (gsl_root_fsolver_set(solver.get(), &f, lo, hi) == GSL_SUCCESS) {
    for (int i = 0; i < 100; ++i) {
      if (gsl_root_fsolver_iterate(solver.get()) != GSL_SUCCESS) break;
      lo = gsl_root_fsolver_x_lower(solver.get());
      hi = gsl_root_fsolver_x_upper(solver.get());
      if (gsl_root_test_interval(lo, hi, 1e-12, 0.0) == GSL_SUCCESS) break;
    }
  }
  gsl_set_error_handler(previous);
  // The upper bracket end always lies on the switching side.
  return hi;
}

}  // namespace

SimState step(const SimState& state, const PlantParams& params,
              const ThermostatConfig& thermostat, double dt) {
  SimState s = state;
  const double end = state.t + dt;
  // A relay switch inside the step is located and applied at its own time;
  // at most a handful can occur within one step of physical length.
  for (int events = 0; events < 8; ++events) {
    if (switching_margin(s, thermostat) >= 0.0) {
      s.compressor_on = !s.compressor_on;
      s.last_switch = s.t;
      continue;
    }
    const double remaining = end - s.t;
    if (!(remaining > 0.0)) break;
    SimState next = rk4(s, params, remaining);
    next.t = end;
    if (!std::isfinite(next.t_air) || !std::isfinite(next.t_water)) {
      std::ostringstream msg;
      msg << "non-finite plant state in step ending at t=" << end << " s";
      throw SimulationError(msg.str());
    }
    if (switching_margin(next, thermostat) < 0.0) return next;
    const double h = locate_crossing(s, params, thermostat, remaining);
    const double t0 = s.t;
    s = rk4(s, params, h);
    s.t = h < remaining ? t0 + h : end;
    s.compressor_on = !s.compressor_on;
    s.last_switch = s.t;
  }
  s.t = end;
  return s;
}

SimState equilibrium_state(const PlantParams& params, const ThermostatConfig& thermostat) {
  SimState s;
  s.t_air = thermostat.t_avg;
  const double to_water = (1.0 - params.air_heat_fraction) * params.internal_load();
  s.t_water = params.ua_wx > 0.0 ? s.t_air + to_water / params.ua_wx : s.t_air;
  return s;
}

CycleStats measure_cycles(const PlantParams& params, const ThermostatConfig& thermostat,
                          const CycleOptions& options) {
  ThermostatConfig fixed = thermostat;
  fixed.modulation_enabled = false;
  SimState s = equilibrium_state(params, fixed);

  std::vector<double> on_times;
  std::vector<double> off_times;
  on_times.reserve(options.min_cycles + 1);
  while (s.t < options.max_time) {
    const bool was_on = s.compressor_on;
    s = step(s, params, fixed, options.dt);
    if (s.last_switch <= options.discard || s.compressor_on == was_on) continue;
    if (s.compressor_on) {
      on_times.push_back(s.last_switch);
      if (static_cast<int>(on_times.size()) > options.min_cycles) break;
    } else if (!on_times.empty()) {
      off_times.push_back(s.last_switch);
    }
  }
  if (static_cast<int>(on_times.size()) <= options.min_cycles) {
    std::ostringstream msg;
    msg << "plant completed " << std::max<int>(0, static_cast<int>(on_times.size()) - 1)
        << " relay cycles in " << options.max_time << " s; need " << options.min_cycles;
    throw SimulationError(msg.str());
  }

  CycleStats stats;
  stats.cycles = options.min_cycles;
  const double span = on_times.back() - on_times.front();
  stats.period = span / stats.cycles;
  double on_total = 0.0;
  for (int i = 0; i < stats.cycles; ++i) on_total += off_times[i] - on_times[i];
  stats.duty = on_total / span;
  stats.mean_on = on_total / stats.cycles;
  stats.mean_off = stats.period - stats.mean_on;
  return stats;
}

double natural_period(const PlantParams& params, const ThermostatConfig& thermostat,
                      const CycleOptions& options) {
  return measure_cycles(params, thermostat, options).period / 60.0;
}

namespace {

enum class Knob { c_air, ua_wx, p_comp };

struct CalibrationProblem {
  double target_period;  // s
  double target_duty;
  PlantParams base;
  ThermostatConfig thermostat;
  CycleOptions cycles;
  std::vector<Knob> knobs;

  int evaluations = 0;
  double best_objective = HUGE_VAL;
  double best_residual = HUGE_VAL;
  CalibrationResult best;

  PlantParams apply(const gsl_vector* x) const {
    PlantParams p = base;
    for (std::size_t i = 0; i < knobs.size(); ++i) {
      const double v = std::exp(gsl_vector_get(x, i));
      switch (knobs[i]) {
        case Knob::c_air: p.c_air = v; break;
        case Knob::ua_wx: p.ua_wx = v; break;
        case Knob::p_comp: p.p_comp = v; break;
      }
    }
    return p;
  }

  double evaluate(const PlantParams& p) {
    ++evaluations;
    if (!(p.extraction() > p.internal_load())) return 1e6;
    CycleStats stats;
    try {
      stats = measure_cycles(p, thermostat, cycles);
    } catch (const SimulationError&) {
      return 1e3;
    }
    const double e_period = (stats.period - target_period) / target_period;
    const double e_duty = (stats.duty - target_duty) / target_duty;
    const double objective = e_period * e_period + e_duty * e_duty;
    if (objective < best_objective) {
      best_objective = objective;
      best_residual = std::max(std::abs(e_period), std::abs(e_duty));
      best.params = p;
      best.period_min = stats.period / 60.0;
      best.duty = stats.duty;
      best.residual = best_residual;
    }
    return objective;
  }

  static double trampoline(const gsl_vector* x, void* self) {
    auto* problem = static_cast<CalibrationProblem*>(self);
    return problem->evaluate(problem->apply(x));
  }
};

}  // namespace

CalibrationResult calibrate(double target_period_min, double target_duty,
                            const CalibrationFixed& fixed, const PlantParams& base,
                            const ThermostatConfig& thermostat,
                            const CalibrationOptions& options) {
  if (!(target_duty > 0.0 && target_duty < 1.0)) {
    throw ConfigError("calibration target_duty must lie in (0, 1)");
  }
  if (!(target_period_min > 0.0)) throw ConfigError("calibration target_period must be > 0");
  thermostat.validate();

  CalibrationProblem problem;
  problem.target_period = target_period_min * 60.0;
  problem.target_duty = target_duty;
  problem.base = base;
  problem.base.q_heater_mean = 200.0;
  problem.base.p_pump = 75.0;
  problem.base.p_fan = 133.0;
  problem.thermostat = thermostat;
  problem.cycles = options.cycles;
  // Budget enough simulated time for the cycles at up to 4x the target period.
  problem.cycles.max_time = std::min(
      options.cycles.max_time,
      options.cycles.discard + 4.0 * (options.cycles.min_cycles + 2) * problem.target_period);

  std::vector<double> start;
  if (fixed.c_air) {
    problem.base.c_air = *fixed.c_air;
  } else {
    problem.knobs.push_back(Knob::c_air);
    start.push_back(problem.base.c_air);
  }
  if (fixed.ua_wx) {
    problem.base.ua_wx = *fixed.ua_wx;
  } else {
    problem.knobs.push_back(Knob::ua_wx);
    start.push_back(problem.base.ua_wx);
  }
  if (fixed.p_comp) {
    problem.base.p_comp = *fixed.p_comp;
  } else {
    problem.knobs.push_back(Knob::p_comp);
    // Energy balance pins p_comp for a given duty; start there.
    start.push_back(problem.base.internal_load() / (problem.base.eta * target_duty));
  }

  gsl_set_error_handler_off();
  if (problem.knobs.empty()) {
    problem.evaluate(problem.base);
  } else {
    const std::size_t n = problem.knobs.size();
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(n),
                                                              gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> steps(gsl_vector_alloc(n),
                                                                  gsl_vector_free);
    for (std::size_t i = 0; i < n; ++i) {
      gsl_vector_set(x.get(), i, std::log(start[i]));
      gsl_vector_set(steps.get(), i, 0.2);
    }
    gsl_multimin_function fn{&CalibrationProblem::trampoline, n, &problem};
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n),
        gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(solver.get(), &fn, x.get(), steps.get());
    while (problem.evaluations < options.max_evaluations &&
           problem.best_residual > options.tolerance) {
      if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_fminimizer_size(solver.get()) < 1e-7) break;
    }
  }

  problem.best.evaluations = problem.evaluations;
  if (!(problem.best_residual <= options.accept)) {
    std::ostringstream msg;
    msg << "calibration did not converge after " << problem.evaluations
        << " evaluations; best relative residual " << problem.best_residual;
    if (std::isfinite(problem.best_residual)) {
      msg << " (period " << problem.best.period_min << " min, duty " << problem.best.duty << ")";
    } else {
      msg << " (no candidate produced a measurable limit cycle)";
    }
    throw SimulationError(msg.str());
  }
  return problem.best;
}

}  // namespace tclab
