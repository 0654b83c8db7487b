#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "tclab/analysis.hpp"
#include "tclab/protocol.hpp"

namespace tclab {

/// Dispersion of each unit's starting point before the shared protocol.
struct InitRandomization {
  double t_air_spread = 0.25;   // degC, uniform half-width around equilibrium
  double t_water_spread = 0.5;  // degC
  bool random_relay = true;
  /// Run each unit a uniform random time in [0, natural period) after warm-up.
  bool random_pre_run = true;
};

/// N identical plants with independent noise under one set-point schedule.
/// From `base` the plant, thermostat, noise shape, modulation, segment length,
/// warm-up and dt are used; `seed` replaces base.seed.
struct EnsembleSpec {
  std::size_t n_units = 500;
  ExperimentSpec base{};
  InitRandomization init{};
  std::uint64_t seed = 1;
  std::size_t segments = 2;  // protocol segments after the pre-run, starting modulated
  unsigned workers = 0;      // 0 = hardware concurrency

  void validate() const;
};

/// Seed of unit `index`.
std::uint64_t unit_seed(std::uint64_t ensemble_seed, std::size_t index);

/// Protocol window of one unit: `segments` alternating mod/quiescent
/// segments, with time measured from the start of the first. The pre-run
/// uses `natural_period_s` as the width of the random offset.
TimeSeries run_unit(const EnsembleSpec& spec, std::size_t index, double natural_period_s);

struct EnsembleResult {
  /// Unit-mean of every channel over the protocol window; compressor_on
  /// holds the on fraction.
  TimeSeries aggregate;
  /// Each unit's modulated cycles folded onto [0, tau), averaged over units.
  /// p_sem is the standard error across units and n_cycles counts unit-cycles.
  /// Empty when the window holds no complete cycle.
  std::optional<CycleAverage> cycle_average;
  double natural_period = 0.0;  // s, width of the random pre-run
};

/// The reduction order is fixed, so results do not depend on the worker
/// count, and power is built from integer on counts, so the aggregate is
/// exactly invariant to unit order.
EnsembleResult run_ensemble(const EnsembleSpec& spec);

/// Standard deviation of p_ac over the non-warm-up samples.
double aggregate_ripple(const TimeSeries& ts);

/// Single-unit protocol of `base` long enough to fold at least `unit_cycles`
/// modulation cycles, for comparison against an ensemble cycle average.
ExperimentSpec matched_single_spec(const ExperimentSpec& base, int unit_cycles);

struct EnsembleComparison {
  double rms_diff = 0.0;   // W
  double tolerance = 0.0;  // W, n_sigma * rms of the combined standard errors
  bool pass = false;
};

/// Pointwise RMS difference between two cycle averages of the same tau and
/// grid. Throws AnalysisError on a mismatch.
EnsembleComparison compare_single_vs_ensemble(const CycleAverage& single,
                                              const CycleAverage& ensemble_ca,
                                              double n_sigma = 3.0);

}  // namespace tclab
