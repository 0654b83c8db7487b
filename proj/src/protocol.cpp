#include "tclab/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "tclab/error.hpp"

namespace tclab {

namespace {

constexpr double kSampleInterval = 1.0;

std::size_t steps_per_sample(double dt) {
  const double ratio = kSampleInterval / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    throw ConfigError("experiment.dt must divide the 1 s sample interval");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

double ExperimentSpec::effective_segment_length() const {
  const double cycles = std::max(1.0, std::ceil(segment_length / tau - 1e-9));
  return cycles * tau;
}

std::size_t ExperimentSpec::segment_count() const {
  const double span = total_duration - warmup_discard;
  return static_cast<std::size_t>(std::ceil(span / effective_segment_length() - 1e-9));
}

double ExperimentSpec::effective_duration() const {
  return warmup_discard + static_cast<double>(segment_count()) * effective_segment_length();
}

void ExperimentSpec::validate() const {
  if (!(delta_t >= 0.0)) throw ConfigError("experiment.delta_t must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("experiment.tau must be > 0");
  if (!(dt > 0.0 && dt <= 1.0)) throw ConfigError("experiment.dt must lie in (0, 1] s");
  steps_per_sample(dt);
  if (!(segment_length > 0.0)) throw ConfigError("experiment.segment_length must be > 0");
  if (!(warmup_discard >= 0.0)) throw ConfigError("experiment.warmup_discard must be >= 0");
  if (std::abs(warmup_discard - std::round(warmup_discard)) > 1e-9 ||
      std::abs(effective_segment_length() - std::round(effective_segment_length())) > 1e-6) {
    throw ConfigError("warm-up and segment lengths must be whole seconds");
  }
  if (!(total_duration > warmup_discard + 4.0 * segment_length)) {
    throw ConfigError(
        "experiment.total_duration must exceed warmup_discard + 4 * segment_length");
  }
  noise.validate();
  params.validate();
  ThermostatConfig probe = thermostat;
  probe.delta_t = delta_t;
  probe.tau = tau;
  probe.validate();
}

std::string_view to_string(SegmentLabel label) {
  switch (label) {
    case SegmentLabel::warmup: return "warmup";
    case SegmentLabel::modulated: return "mod";
    case SegmentLabel::quiescent: return "quiescent";
  }
  return "?";
}

SegmentLabel parse_segment_label(std::string_view text) {
  if (text == "warmup") return SegmentLabel::warmup;
  if (text == "mod") return SegmentLabel::modulated;
  if (text == "quiescent") return SegmentLabel::quiescent;
  throw IoError("unknown segment label '" + std::string(text) + "'");
}

void TimeSeries::reserve(std::size_t n) {
  p_ac.reserve(n);
  t_air.reserve(n);
  t_water.reserve(n);
  setpoint.reserve(n);
  q_heater.reserve(n);
  compressor_on.reserve(n);
  segment.reserve(n);
}

void TimeSeries::check_consistent() const {
  const std::size_t n = p_ac.size();
  if (t_air.size() != n || t_water.size() != n || setpoint.size() != n ||
      q_heater.size() != n || compressor_on.size() != n || segment.size() != n) {
    throw AnalysisError("time series channels have unequal lengths");
  }
}

ThermostatConfig protocol_thermostat(const ExperimentSpec& spec, double t) {
  ThermostatConfig cfg = spec.thermostat;
  cfg.delta_t = spec.delta_t;
  cfg.tau = spec.tau;
  cfg.modulation_enabled = false;
  if (t < spec.warmup_discard) return cfg;
  const double seg = spec.effective_segment_length();
  const double index = std::floor((t - spec.warmup_discard) / seg);
  if (static_cast<long long>(index) % 2 == 0) {
    cfg.modulation_enabled = true;
    cfg.phase_origin = spec.warmup_discard + index * seg;
  }
  return cfg;
}

UnitRunner::UnitRunner(const PlantParams& params, double dt, const NoiseConfig& noise,
                       std::uint64_t seed, const SimState& initial)
    : params_(&params),
      dt_(dt),
      substeps_(steps_per_sample(dt)),
      noise_(noise, seed),
      state_(initial),
      sample_index_(std::llround(initial.t / kSampleInterval)) {}

UnitRunner::Sample UnitRunner::advance(const ThermostatConfig& cfg) {
  const PlantParams& p = *params_;
  // Time is kept as an exact sample count so long runs do not drift.
  state_.t = static_cast<double>(sample_index_) * kSampleInterval;
  state_.q_noise = noise_.offset_at(state_.t);
  const Sample out{p.p_acfan + (state_.compressor_on ? p.p_comp : 0.0), state_.t_air,
                   state_.t_water, p.q_heater_mean + state_.q_noise, state_.compressor_on};
  for (std::size_t k = 0; k < substeps_; ++k) state_ = step(state_, p, cfg, dt_);
  ++sample_index_;
  return out;
}

TimeSeries run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto warmup_samples = static_cast<std::size_t>(std::llround(spec.warmup_discard));
  const auto seg_samples =
      static_cast<std::size_t>(std::llround(spec.effective_segment_length()));
  const std::size_t n = warmup_samples + spec.segment_count() * seg_samples;

  TimeSeries ts;
  ts.dt = kSampleInterval;
  ts.tau = spec.tau;
  ts.delta_t = spec.delta_t;
  ts.t_avg = spec.thermostat.t_avg;
  ts.reserve(n);

  UnitRunner unit(spec.params, spec.dt, spec.noise, spec.seed,
                  equilibrium_state(spec.params, spec.thermostat));
  ThermostatConfig cfg = protocol_thermostat(spec, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    SegmentLabel label = SegmentLabel::warmup;
    if (i >= warmup_samples) {
      const bool mod = ((i - warmup_samples) / seg_samples) % 2 == 0;
      label = mod ? SegmentLabel::modulated : SegmentLabel::quiescent;
      if ((i - warmup_samples) % seg_samples == 0) cfg = protocol_thermostat(spec, t);
    }
    ts.setpoint.push_back(setpoint(t, cfg));
    ts.segment.push_back(label);
    // The last step of a segment decides the relay against that segment's
    // band; modulation ends on a zero of the sine so both bands agree there.
    UnitRunner::Sample sample{};
    try {
      sample = unit.advance(cfg);
    } catch (const SimulationError& e) {
      std::ostringstream msg;
      msg << "experiment (delta_t=" << spec.delta_t << ", tau=" << spec.tau
          << ") failed: " << e.what();
      throw SimulationError(msg.str());
    }
    ts.p_ac.push_back(sample.p_ac);
    ts.t_air.push_back(sample.t_air);
    ts.t_water.push_back(sample.t_water);
    ts.q_heater.push_back(sample.q_heater);
    ts.compressor_on.push_back(sample.on ? 1.0 : 0.0);
  }
  return ts;
}

std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t index) {
  return mix_seed(base_seed, index);
}

ExperimentSpec sweep_point_spec(const ExperimentSpec& base, const GridPoint& point,
                                std::size_t index) {
  ExperimentSpec spec = base;
  spec.delta_t = point.delta_t;
  spec.tau = point.tau;
  spec.seed = sweep_seed(base.seed, index);
  return spec;
}

void validate_grid(const std::vector<GridPoint>& grid) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  std::set<std::pair<double, double>> seen;
  for (const GridPoint& g : grid) {
    if (!seen.emplace(g.delta_t, g.tau).second) {
      std::ostringstream msg;
      msg << "duplicate grid point (delta_t=" << g.delta_t << ", tau=" << g.tau << ")";
      throw ConfigError(msg.str());
    }
  }
}

std::vector<TimeSeries> run_sweep(const std::vector<GridPoint>& grid, const ExperimentSpec& base,
                                  unsigned workers) {
  std::vector<TimeSeries> results(grid.size());
  for_each_sweep_point(grid, base, workers,
                       [&](std::size_t i, TimeSeries&& ts) { results[i] = std::move(ts); });
  return results;
}

void for_each_sweep_point(const std::vector<GridPoint>& grid, const ExperimentSpec& base,
                          unsigned workers,
                          const std::function<void(std::size_t, TimeSeries&&)>& sink) {
  validate_grid(grid);
  std::vector<ExperimentSpec> specs;
  specs.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    specs.push_back(sweep_point_spec(base, grid[i], i));
    try {
      specs.back().validate();
    } catch (const ConfigError& e) {
      std::ostringstream msg;
      msg << "grid point " << i << " (delta_t=" << grid[i].delta_t << ", tau=" << grid[i].tau
          << "): " << e.what();
      throw ConfigError(msg.str());
    }
  }

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(grid.size()));

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_index = grid.size();

  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        sink(i, run_experiment(specs[i]));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  if (first_error) {
    std::ostringstream where;
    where << "grid point " << first_error_index << " (delta_t=" << grid[first_error_index].delta_t
          << ", tau=" << grid[first_error_index].tau << "): ";
    try {
      std::rethrow_exception(first_error);
    } catch (const SimulationError& e) {
      throw SimulationError(where.str() + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where.str() + e.what());
    }
  }
}

std::vector<SegmentSpan> segment_spans(const TimeSeries& ts) {
  std::vector<SegmentSpan> spans;
  for (std::size_t i = 0; i < ts.segment.size();) {
    std::size_t j = i;
    while (j < ts.segment.size() && ts.segment[j] == ts.segment[i]) ++j;
    spans.push_back({ts.segment[i], i, j});
    i = j;
  }
  return spans;
}

SegmentAverages segment_averages(const TimeSeries& ts) {
  ts.check_consistent();
  SegmentAverages out;
  double p_mod = 0.0, p_0 = 0.0, q_mod = 0.0, q_0 = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    switch (ts.segment[i]) {
      case SegmentLabel::modulated:
        p_mod += ts.p_ac[i];
        q_mod += ts.q_heater[i];
        ++out.mod_samples;
        break;
      case SegmentLabel::quiescent:
        p_0 += ts.p_ac[i];
        q_0 += ts.q_heater[i];
        ++out.quiescent_samples;
        break;
      case SegmentLabel::warmup:
        break;
    }
  }
  if (out.mod_samples == 0) throw AnalysisError("time series has no modulated segment");
  if (out.quiescent_samples == 0) throw AnalysisError("time series has no quiescent segment");
  out.p_mod = p_mod / static_cast<double>(out.mod_samples);
  out.q_w_mod = q_mod / static_cast<double>(out.mod_samples);
  out.p_0 = p_0 / static_cast<double>(out.quiescent_samples);
  out.q_w_0 = q_0 / static_cast<double>(out.quiescent_samples);
  return out;
}

}  // namespace tclab
