#include "tclab/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "tclab/error.hpp"
#include "tclab/noise.hpp"

namespace tclab {

namespace {

// Units per reduction chunk. Fixed so the summation tree never depends on
// how many workers ran.
constexpr std::size_t kChunk = 16;

struct Sums {
  std::vector<long long> on;
  std::vector<double> t_air, t_water, q_heater;
  // Per phase offset: sum over units of the unit's folded on count, and of its square.
  std::vector<long long> fold, fold_sq;

  Sums(std::size_t n, std::size_t period)
      : on(n, 0), t_air(n, 0.0), t_water(n, 0.0), q_heater(n, 0.0), fold(period, 0),
        fold_sq(period, 0) {}

  void add(const TimeSeries& ts, const std::vector<std::size_t>& cycle_starts) {
    for (std::size_t i = 0; i < on.size(); ++i) {
      on[i] += ts.compressor_on[i] > 0.5 ? 1 : 0;
      t_air[i] += ts.t_air[i];
      t_water[i] += ts.t_water[i];
      q_heater[i] += ts.q_heater[i];
    }
    for (std::size_t j = 0; j < fold.size(); ++j) {
      long long count = 0;
      for (std::size_t s : cycle_starts) count += ts.compressor_on[s + j] > 0.5 ? 1 : 0;
      fold[j] += count;
      fold_sq[j] += count * count;
    }
  }

  void add(const Sums& other) {
    for (std::size_t i = 0; i < on.size(); ++i) {
      on[i] += other.on[i];
      t_air[i] += other.t_air[i];
      t_water[i] += other.t_water[i];
      q_heater[i] += other.q_heater[i];
    }
    for (std::size_t j = 0; j < fold.size(); ++j) {
      fold[j] += other.fold[j];
      fold_sq[j] += other.fold_sq[j];
    }
  }
};

// Starts of the complete modulation cycles in a unit window; empty if tau is
// not a whole number (>= 2) of samples.
std::vector<std::size_t> cycle_starts(const ExperimentSpec& base, std::size_t segments,
                                      std::size_t* period) {
  *period = 0;
  const double rounded = std::round(base.tau);
  if (rounded < 2.0 || std::abs(base.tau - rounded) > 1e-9 * rounded) return {};
  const auto tau = static_cast<std::size_t>(rounded);
  const auto seg = static_cast<std::size_t>(std::llround(base.effective_segment_length()));
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < segments; k += 2) {
    for (std::size_t s = k * seg; s + tau <= (k + 1) * seg; s += tau) starts.push_back(s);
  }
  if (!starts.empty()) *period = tau;
  return starts;
}

ThermostatConfig base_thermostat(const ExperimentSpec& base) {
  ThermostatConfig cfg = base.thermostat;
  cfg.delta_t = base.delta_t;
  cfg.tau = base.tau;
  cfg.modulation_enabled = false;
  return cfg;
}

double uniform_in(NoiseRng& rng, double half_width) {
  return (2.0 * rng.uniform() - 1.0) * half_width;
}

}  // namespace

void EnsembleSpec::validate() const {
  if (n_units < 1) throw ConfigError("ensemble.n_units must be >= 1");
  if (segments < 1) throw ConfigError("ensemble.segments must be >= 1");
  if (!(init.t_air_spread >= 0.0) || !(init.t_water_spread >= 0.0)) {
    throw ConfigError("ensemble.init spreads must be >= 0");
  }
  ExperimentSpec probe = base;
  // The ensemble window need not satisfy the single-run duration rule.
  probe.total_duration = probe.warmup_discard + 5.0 * probe.segment_length;
  probe.validate();
}

std::uint64_t unit_seed(std::uint64_t ensemble_seed, std::size_t index) {
  return mix_seed(ensemble_seed, index);
}

TimeSeries run_unit(const EnsembleSpec& spec, std::size_t index, double natural_period_s) {
  const ExperimentSpec& base = spec.base;
  const std::uint64_t seed = unit_seed(spec.seed, index);
  NoiseRng init_rng(mix_seed(seed, 1));

  const ThermostatConfig quiet = base_thermostat(base);
  SimState start = equilibrium_state(base.params, quiet);
  start.t_air += uniform_in(init_rng, spec.init.t_air_spread);
  start.t_water += uniform_in(init_rng, spec.init.t_water_spread);
  if (spec.init.random_relay) start.compressor_on = init_rng.uniform() < 0.5;
  double pre_run = base.warmup_discard;
  if (spec.init.random_pre_run) pre_run += std::floor(init_rng.uniform() * natural_period_s);

  const auto pre_samples = static_cast<std::size_t>(std::llround(pre_run));
  const auto seg_samples = static_cast<std::size_t>(std::llround(base.effective_segment_length()));
  const std::size_t n = spec.segments * seg_samples;

  TimeSeries ts;
  ts.dt = 1.0;
  ts.tau = base.tau;
  ts.delta_t = base.delta_t;
  ts.t_avg = base.thermostat.t_avg;
  ts.reserve(n);

  try {
    UnitRunner unit(base.params, base.dt, base.noise, mix_seed(seed, 2), start);
    for (std::size_t i = 0; i < pre_samples; ++i) unit.advance(quiet);

    ThermostatConfig cfg = quiet;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t seg = i / seg_samples;
      const bool mod = seg % 2 == 0;
      if (i % seg_samples == 0) {
        cfg = quiet;
        cfg.modulation_enabled = mod;
        cfg.phase_origin = static_cast<double>(pre_samples + i);
      }
      ts.setpoint.push_back(setpoint(static_cast<double>(pre_samples + i), cfg));
      ts.segment.push_back(mod ? SegmentLabel::modulated : SegmentLabel::quiescent);
      const UnitRunner::Sample s = unit.advance(cfg);
      ts.p_ac.push_back(s.p_ac);
      ts.t_air.push_back(s.t_air);
      ts.t_water.push_back(s.t_water);
      ts.q_heater.push_back(s.q_heater);
      ts.compressor_on.push_back(s.on ? 1.0 : 0.0);
    }
  } catch (const SimulationError& e) {
    std::ostringstream msg;
    msg << "ensemble unit " << index << ": " << e.what();
    throw SimulationError(msg.str());
  }
  return ts;
}

EnsembleResult run_ensemble(const EnsembleSpec& spec) {
  spec.validate();
  const ThermostatConfig quiet = base_thermostat(spec.base);
  const double period = spec.init.random_pre_run
                            ? measure_cycles(spec.base.params, quiet).period
                            : 0.0;

  const std::size_t n_chunks = (spec.n_units + kChunk - 1) / kChunk;
  unsigned workers = spec.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n_chunks));

  // The first unit provides the common channels (set point, labels).
  TimeSeries out;
  const auto seg_samples =
      static_cast<std::size_t>(std::llround(spec.base.effective_segment_length()));
  const std::size_t n = spec.segments * seg_samples;
  std::size_t period_samples = 0;
  const std::vector<std::size_t> starts = cycle_starts(spec.base, spec.segments, &period_samples);
  Sums total(n, period_samples);

  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::condition_variable reduced_cv;
  std::size_t reduced = 0;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      Sums chunk(n, period_samples);
      std::exception_ptr error;
      TimeSeries first;
      try {
        const std::size_t end = std::min(spec.n_units, (c + 1) * kChunk);
        for (std::size_t u = c * kChunk; u < end; ++u) {
          TimeSeries ts = run_unit(spec, u, period);
          chunk.add(ts, starts);
          if (u == 0) first = std::move(ts);
        }
      } catch (...) {
        error = std::current_exception();
      }
      std::unique_lock lock(mutex);
      reduced_cv.wait(lock, [&] { return reduced == c; });
      if (error && !first_error) first_error = error;
      if (!first_error) {
        total.add(chunk);
        if (c == 0) out = std::move(first);
      }
      ++reduced;
      reduced_cv.notify_all();
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (first_error) std::rethrow_exception(first_error);

  const PlantParams& p = spec.base.params;
  const double units = static_cast<double>(spec.n_units);
  for (std::size_t i = 0; i < n; ++i) {
    const double fraction = static_cast<double>(total.on[i]) / units;
    out.compressor_on[i] = fraction;
    out.p_ac[i] = p.p_acfan + p.p_comp * fraction;
    out.t_air[i] = total.t_air[i] / units;
    out.t_water[i] = total.t_water[i] / units;
    out.q_heater[i] = total.q_heater[i] / units;
  }

  EnsembleResult result;
  result.natural_period = period;
  if (period_samples > 0) {
    const auto cycles = static_cast<double>(starts.size());
    CycleAverage ca;
    ca.tau = spec.base.tau;
    ca.n_cycles = static_cast<int>(starts.size() * spec.n_units);
    ca.phase_grid.resize(period_samples);
    ca.p_avg.resize(period_samples);
    ca.p_sem.assign(period_samples, 0.0);
    const auto n_units = static_cast<long long>(spec.n_units);
    for (std::size_t j = 0; j < period_samples; ++j) {
      ca.phase_grid[j] = static_cast<double>(j);
      ca.p_avg[j] = p.p_acfan + p.p_comp * static_cast<double>(total.fold[j]) / (units * cycles);
      if (n_units > 1) {
        // N * sum(c^2) - (sum c)^2 is exact in integers.
        const long long spread = n_units * total.fold_sq[j] - total.fold[j] * total.fold[j];
        const double var = static_cast<double>(spread) / (units * (units - 1.0));
        ca.p_sem[j] = p.p_comp / cycles * std::sqrt(var / units);
      }
    }
    result.cycle_average = std::move(ca);
  }
  result.aggregate = std::move(out);
  return result;
}

double aggregate_ripple(const TimeSeries& ts) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.segment[i] == SegmentLabel::warmup) continue;
    sum += ts.p_ac[i];
    ++count;
  }
  if (count < 2) throw AnalysisError("aggregate_ripple: need at least 2 samples");
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.segment[i] == SegmentLabel::warmup) continue;
    var += (ts.p_ac[i] - mean) * (ts.p_ac[i] - mean);
  }
  return std::sqrt(var / static_cast<double>(count - 1));
}

ExperimentSpec matched_single_spec(const ExperimentSpec& base, int unit_cycles) {
  ExperimentSpec single = base;
  const double per_segment = std::round(base.effective_segment_length() / base.tau);
  const double mod_segments = std::max(3.0, std::ceil(unit_cycles / per_segment));
  single.total_duration =
      base.warmup_discard + 2.0 * mod_segments * base.effective_segment_length();
  return single;
}

EnsembleComparison compare_single_vs_ensemble(const CycleAverage& single,
                                              const CycleAverage& ensemble_ca,
                                              double n_sigma) {
  if (single.tau != ensemble_ca.tau) {
    std::ostringstream msg;
    msg << "compare_single_vs_ensemble: tau mismatch (" << single.tau << " vs "
        << ensemble_ca.tau << ")";
    throw AnalysisError(msg.str());
  }
  if (single.phase_grid != ensemble_ca.phase_grid || single.p_avg.size() != single.p_sem.size() ||
      ensemble_ca.p_avg.size() != ensemble_ca.p_sem.size() ||
      single.p_avg.size() != single.phase_grid.size() ||
      ensemble_ca.p_avg.size() != ensemble_ca.phase_grid.size()) {
    throw AnalysisError("compare_single_vs_ensemble: phase grids differ");
  }
  if (single.p_avg.empty()) throw AnalysisError("compare_single_vs_ensemble: empty cycle average");
  double diff2 = 0.0, sem2 = 0.0;
  for (std::size_t j = 0; j < single.p_avg.size(); ++j) {
    const double d = single.p_avg[j] - ensemble_ca.p_avg[j];
    diff2 += d * d;
    sem2 += single.p_sem[j] * single.p_sem[j] + ensemble_ca.p_sem[j] * ensemble_ca.p_sem[j];
  }
  const double m = static_cast<double>(single.p_avg.size());
  EnsembleComparison r;
  r.rms_diff = std::sqrt(diff2 / m);
  r.tolerance = n_sigma * std::sqrt(sem2 / m);
  r.pass = r.rms_diff < r.tolerance;
  return r;
}

}  // namespace tclab
