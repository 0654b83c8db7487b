#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "tclab/noise.hpp"
#include "tclab/plant.hpp"
#include "tclab/thermostat.hpp"

namespace tclab {

/// One modulation experiment: warm-up, then alternating modulated and
/// quiescent segments of equal length.
struct ExperimentSpec {
  double delta_t = 0.0;   // degC
  double tau = 1200.0;    // s
  double total_duration = 3.5 * 24 * 3600.0;  // s
  double segment_length = 5400.0;             // s, nominal
  double warmup_discard = 3.0 * 3600.0;       // s
  double dt = 1.0;        // s, integrator step; must divide 1 s
  std::uint64_t seed = 1; // seeds the heater noise stream
  NoiseConfig noise{};
  ThermostatConfig thermostat{};
  PlantParams params = default_plant_params();

  /// Nominal length rounded up to a whole number of modulation periods.
  double effective_segment_length() const;
  /// Number of segments after warm-up; the last one is run to completion.
  std::size_t segment_count() const;
  /// Warm-up plus all segments.
  double effective_duration() const;
  void validate() const;
};

enum class SegmentLabel : std::uint8_t { warmup, modulated, quiescent };

std::string_view to_string(SegmentLabel label);
SegmentLabel parse_segment_label(std::string_view text);

/// Channels sampled every `dt` seconds (1 s for experiment output). Sample i
/// holds the state at t = i*dt and the relay/heater input applied over
/// [t, t + dt).
struct TimeSeries {
  double dt = 1.0;
  double tau = 0.0;       // s, modulation period of the run
  double delta_t = 0.0;   // degC
  double t_avg = 0.0;     // degC
  std::vector<double> p_ac;
  std::vector<double> t_air;
  std::vector<double> t_water;
  std::vector<double> setpoint;
  std::vector<double> q_heater;
  std::vector<double> compressor_on;  // 0/1 for one unit, on-fraction for aggregates
  std::vector<SegmentLabel> segment;

  std::size_t size() const { return p_ac.size(); }
  double time(std::size_t i) const { return static_cast<double>(i) * dt; }
  void reserve(std::size_t n);
  /// Throws AnalysisError if channel lengths differ.
  void check_consistent() const;

  bool operator==(const TimeSeries&) const = default;
};

/// One plant with its relay and heater noise, advanced one 1 s sample at a time.
class UnitRunner {
 public:
  UnitRunner(const PlantParams& params, double dt, const NoiseConfig& noise, std::uint64_t seed,
             const SimState& initial);

  struct Sample {
    double p_ac;      // W
    double t_air;     // degC
    double t_water;   // degC
    double q_heater;  // W
    bool on;
  };

  /// Picks up the heater offset in force now, returns the current sample and
  /// integrates across the following sample interval under `cfg`.
  Sample advance(const ThermostatConfig& cfg);

  const SimState& state() const { return state_; }
  double time() const { return state_.t; }

 private:
  const PlantParams* params_;
  double dt_;
  std::size_t substeps_;
  NoiseInjector noise_;
  SimState state_;
  long long sample_index_ = 0;
};

/// Samples the thermostat configuration the protocol uses at time t.
ThermostatConfig protocol_thermostat(const ExperimentSpec& spec, double t);

TimeSeries run_experiment(const ExperimentSpec& spec);

struct GridPoint {
  double delta_t;  // degC
  double tau;      // s
};

/// Seed for grid point `index` of a sweep rooted at `base_seed`.
std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t index);

/// Spec actually executed for one grid point.
ExperimentSpec sweep_point_spec(const ExperimentSpec& base, const GridPoint& point,
                                std::size_t index);

/// Runs each grid point on up to `workers` threads (0 = hardware
/// concurrency). Results follow grid order.
std::vector<TimeSeries> run_sweep(const std::vector<GridPoint>& grid, const ExperimentSpec& base,
                                  unsigned workers = 0);

/// Like run_sweep but hands each finished series to `sink` instead of keeping
/// it. `sink` runs on worker threads, possibly concurrently.
void for_each_sweep_point(const std::vector<GridPoint>& grid, const ExperimentSpec& base,
                          unsigned workers,
                          const std::function<void(std::size_t, TimeSeries&&)>& sink);

/// Throws ConfigError on an empty grid or repeated (delta_t, tau).
void validate_grid(const std::vector<GridPoint>& grid);

struct SegmentAverages {
  double p_mod = 0.0;    // W
  double p_0 = 0.0;      // W
  double q_w_mod = 0.0;  // W, heater input including noise
  double q_w_0 = 0.0;    // W
  std::size_t mod_samples = 0;
  std::size_t quiescent_samples = 0;
};

SegmentAverages segment_averages(const TimeSeries& ts);

struct SegmentSpan {
  SegmentLabel label;
  std::size_t begin;  // sample index
  std::size_t end;    // one past the last sample
};

/// Maximal runs of identically labelled samples, in order.
std::vector<SegmentSpan> segment_spans(const TimeSeries& ts);

}  // namespace tclab
