#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "tclab/analysis.hpp"
#include "tclab/error.hpp"
#include "tclab/protocol.hpp"

namespace tclab {
namespace {

ExperimentSpec spec_at(double delta_t, double tau_min, std::uint64_t seed = 1) {
  ExperimentSpec s;
  s.delta_t = delta_t;
  s.tau = tau_min * 60.0;
  s.seed = seed;
  return s;
}

TEST(ExperimentSpec, SegmentRoundsUpToWholePeriods) {
  EXPECT_DOUBLE_EQ(spec_at(0.25, 20).effective_segment_length(), 6000.0);
  EXPECT_DOUBLE_EQ(spec_at(0.25, 9).effective_segment_length(), 5400.0);
  EXPECT_DOUBLE_EQ(spec_at(0.25, 40).effective_segment_length(), 7200.0);
  EXPECT_DOUBLE_EQ(spec_at(0.25, 7).effective_segment_length(), 13 * 420.0);
}

TEST(ExperimentSpec, FinalSegmentCompleted) {
  const ExperimentSpec s = spec_at(0.25, 40);
  EXPECT_EQ(s.segment_count(), 41u);
  EXPECT_DOUBLE_EQ(s.effective_duration(), 10800.0 + 41 * 7200.0);
  EXPECT_GE(s.effective_duration(), s.total_duration);
}

TEST(ExperimentSpec, Validation) {
  ExperimentSpec s;
  EXPECT_NO_THROW(s.validate());
  s.total_duration = s.warmup_discard + 4 * s.segment_length;
  EXPECT_THROW(s.validate(), ConfigError);
  s = ExperimentSpec{};
  s.dt = 0.3;
  EXPECT_THROW(s.validate(), ConfigError);
  s = ExperimentSpec{};
  s.dt = 2.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = ExperimentSpec{};
  s.tau = 1200.5;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(RunExperiment, LabelsAlternateAfterWarmup) {
  const ExperimentSpec s = spec_at(0.25, 20);
  const TimeSeries ts = run_experiment(s);
  ts.check_consistent();
  ASSERT_EQ(ts.size(), static_cast<std::size_t>(s.effective_duration()));
  const auto spans = segment_spans(ts);
  ASSERT_EQ(spans.front().label, SegmentLabel::warmup);
  EXPECT_EQ(spans.front().end, 10800u);
  ASSERT_EQ(spans.size(), 1 + s.segment_count());
  for (std::size_t k = 1; k < spans.size(); ++k) {
    EXPECT_EQ(spans[k].label, k % 2 == 1 ? SegmentLabel::modulated : SegmentLabel::quiescent);
    EXPECT_EQ(spans[k].end - spans[k].begin, 6000u);
  }
  int quiescent = 0;
  for (const auto& sp : spans) quiescent += sp.label == SegmentLabel::quiescent;
  EXPECT_GE(quiescent, 24);
}

TEST(RunExperiment, PowerChannelMatchesRelay) {
  const ExperimentSpec s = spec_at(0.25, 20);
  const TimeSeries ts = run_experiment(s);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ASSERT_EQ(ts.p_ac[i], s.params.p_acfan + ts.compressor_on[i] * s.params.p_comp);
  }
}

TEST(RunExperiment, SetpointFollowsProtocol) {
  const ExperimentSpec s = spec_at(0.25, 20);
  const TimeSeries ts = run_experiment(s);
  for (std::size_t i = 0; i < ts.size(); i += 7) {
    const double t = static_cast<double>(i);
    double want = 24.0;
    if (ts.segment[i] == SegmentLabel::modulated) {
      const double since = std::fmod(t - 10800.0, 6000.0);
      want += 0.25 * std::sin(2.0 * M_PI * since / 1200.0);
    }
    ASSERT_NEAR(ts.setpoint[i], want, 1e-9) << "t=" << t;
  }
}

TEST(RunExperiment, BitExactDeterminism) {
  const ExperimentSpec s = spec_at(0.25, 9, 123);
  EXPECT_TRUE(run_experiment(s) == run_experiment(s));
  EXPECT_FALSE(run_experiment(s) == run_experiment(spec_at(0.25, 9, 124)));
}

TEST(RunExperiment, FortyMinuteRunCollectsSixtyTwoCycles) {
  const TimeSeries ts = run_experiment(spec_at(0.25, 40));
  EXPECT_GE(cycle_average(ts, 2400.0).n_cycles, 62);
}

// One realisation's segment difference scatters by about 2.7 W, so the 2 W
// bound applies to the mean over independent runs.
TEST(RunExperiment, NoModulationSegmentsIndistinguishable) {
  const int runs = 32;
  double pooled = 0.0;
  for (int r = 0; r < runs; ++r) {
    const SegmentAverages a = segment_averages(run_experiment(spec_at(0.0, 20, mix_seed(3, r))));
    pooled += (a.p_mod - a.p_0) / runs;
  }
  EXPECT_LT(std::abs(pooled), 2.0);
}

TEST(RunExperiment, NoiseFreeCyclingIsPeriodic) {
  ExperimentSpec s = spec_at(0.0, 20);
  s.noise.enabled = false;
  const TimeSeries ts = run_experiment(s);
  std::vector<double> ons;
  for (std::size_t i = 10800; i < ts.size(); ++i) {
    if (ts.compressor_on[i] > 0.5 && ts.compressor_on[i - 1] < 0.5) ons.push_back(double(i));
  }
  ASSERT_GT(ons.size(), 100u);
  for (std::size_t k = 2; k < ons.size(); ++k) {
    ASSERT_LE(std::abs((ons[k] - ons[k - 1]) - (ons[k - 1] - ons[k - 2])), 1.0 + 1e-9);
  }
  const double mean = (ons.back() - ons.front()) / double(ons.size() - 1);
  EXPECT_NEAR(mean, measure_cycles(s.params, s.thermostat).period, 1.0);
}

// Time-averaged energy balance of the quiescent plant, noise off, 24 h.
TEST(Invariants, EnergyConservationWithinOneWatt) {
  ExperimentSpec s = spec_at(0.0, 20);
  s.noise.enabled = false;
  s.total_duration = 10800.0 + 86400.0 + 6000.0;
  const TimeSeries ts = run_experiment(s);
  const PlantParams& p = s.params;
  double in = 0.0, out = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 10800; i + 1 < ts.size(); ++i, ++n) {
    in += ts.q_heater[i] + p.p_pump + p.p_fan +
          p.ua_shell * (p.t_shell - 0.5 * (ts.t_air[i] + ts.t_air[i + 1]));
    out += ts.compressor_on[i] * p.extraction();
  }
  ASSERT_GE(n, 86400u);
  EXPECT_LT(std::abs(in / n - out / n), 1.0);
}

TEST(Invariants, MeanAirNearSetpointWithShellAtAverage) {
  const TimeSeries ts = run_experiment(spec_at(0.0, 20));
  double sum = 0.0;
  for (std::size_t i = 10800; i < ts.size(); ++i) sum += ts.t_air[i];
  EXPECT_LT(std::abs(sum / double(ts.size() - 10800) - 24.0), 0.25);
}

// While the set point moves slower than the plant can follow, the air leaves
// the band by at most the relative drift of one step.
TEST(Invariants, DeadBandContainmentUnderSlowModulation) {
  for (double tau_min : {0.0, 20.0, 40.0}) {
    const TimeSeries ts = run_experiment(spec_at(tau_min > 0.0 ? 0.25 : 0.0,
                                                 tau_min > 0.0 ? tau_min : 20.0));
    for (std::size_t i = 10800; i < ts.size(); ++i) {
      const double drift = std::abs(ts.t_air[i] - ts.t_air[i - 1]) +
                           std::abs(ts.setpoint[i] - ts.setpoint[i - 1]);
      ASSERT_LE(std::abs(ts.t_air[i] - ts.setpoint[i]) - 0.25, drift * (1.0 + 1e-9))
          << "tau " << tau_min << " min, sample " << i;
    }
  }
}

// Fast modulation outruns the plant; the relay must still hold the correct
// state whenever the air is outside the band, and the air stays bounded.
TEST(Invariants, RelayTracksBandUnderFastModulation) {
  for (double tau_min : {3.0, 9.0}) {
    const ExperimentSpec s = spec_at(0.5, tau_min);
    const TimeSeries ts = run_experiment(s);
    for (std::size_t i = 10800; i < ts.size(); ++i) {
      if (ts.t_air[i] > ts.setpoint[i] + 0.25) ASSERT_GT(ts.compressor_on[i], 0.5) << i;
      if (ts.t_air[i] < ts.setpoint[i] - 0.25) ASSERT_LT(ts.compressor_on[i], 0.5) << i;
      ASSERT_LT(std::abs(ts.t_air[i] - 24.0), 0.5 + 0.25 + 0.5);
    }
  }
}

// Spread of one realisation's 3.5-day heater mean is about 4.5 W, so the 2 W
// tolerance applies to the pooled mean over independent runs.
TEST(Invariants, HeaterPowerAveragesToMean) {
  double pooled = 0.0;
  const int runs = 32;
  for (int r = 0; r < runs; ++r) {
    const TimeSeries ts = run_experiment(spec_at(0.0, 20, 1000 + r));
    pooled += std::accumulate(ts.q_heater.begin(), ts.q_heater.end(), 0.0) / ts.size();
  }
  EXPECT_LT(std::abs(pooled / runs - 200.0), 2.0);
}

TEST(SegmentAverages, ConstantPower) {
  TimeSeries ts = oracle::synthetic_series(10, 3, [](std::size_t, std::size_t) { return 450.0; });
  std::fill(ts.p_ac.begin(), ts.p_ac.end(), 450.0);
  const SegmentAverages a = segment_averages(ts);
  EXPECT_EQ(a.p_mod, 450.0);
  EXPECT_EQ(a.p_0, 450.0);
}

TEST(SegmentAverages, HandBuiltSeries) {
  TimeSeries ts;
  const double p[] = {1, 2, 3, 4, 5, 6, 7, 8};
  const double q[] = {10, 20, 30, 40, 50, 60, 70, 80};
  const SegmentLabel l[] = {SegmentLabel::warmup,    SegmentLabel::modulated,
                            SegmentLabel::modulated, SegmentLabel::quiescent,
                            SegmentLabel::quiescent, SegmentLabel::quiescent,
                            SegmentLabel::modulated, SegmentLabel::quiescent};
  for (int i = 0; i < 8; ++i) {
    ts.p_ac.push_back(p[i]);
    ts.q_heater.push_back(q[i]);
    ts.segment.push_back(l[i]);
    ts.t_air.push_back(0);
    ts.t_water.push_back(0);
    ts.setpoint.push_back(0);
    ts.compressor_on.push_back(0);
  }
  const SegmentAverages a = segment_averages(ts);
  EXPECT_DOUBLE_EQ(a.p_mod, (2 + 3 + 7) / 3.0);
  EXPECT_DOUBLE_EQ(a.p_0, (4 + 5 + 6 + 8) / 4.0);
  EXPECT_DOUBLE_EQ(a.q_w_mod, (20 + 30 + 70) / 3.0);
  EXPECT_DOUBLE_EQ(a.q_w_0, (40 + 50 + 60 + 80) / 4.0);
  EXPECT_EQ(a.mod_samples, 3u);
  EXPECT_EQ(a.quiescent_samples, 4u);
}

TEST(SegmentAverages, MissingKindThrows) {
  TimeSeries ts = oracle::synthetic_series(10, 3, [](std::size_t, std::size_t) { return 1.0; });
  for (auto& l : ts.segment) l = SegmentLabel::modulated;
  EXPECT_THROW(segment_averages(ts), AnalysisError);
}

TEST(RunSweep, EmptyGridThrows) {
  EXPECT_THROW(run_sweep({}, ExperimentSpec{}), ConfigError);
}

TEST(RunSweep, DuplicatePointThrows) {
  EXPECT_THROW(run_sweep({{0.25, 1200.0}, {0.25, 1200.0}}, ExperimentSpec{}), ConfigError);
}

TEST(RunSweep, ThreeByThreeGridGivesNineSeries) {
  std::vector<GridPoint> grid;
  for (double dt : {0.0625, 0.125, 0.25}) {
    for (double tau : {180.0, 600.0, 1200.0}) grid.push_back({dt, tau});
  }
  ExperimentSpec base;
  base.total_duration = 10800.0 + 6 * 5400.0;
  const auto out = run_sweep(grid, base, 3);
  ASSERT_EQ(out.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(out[i].delta_t, grid[i].delta_t);
    EXPECT_EQ(out[i].tau, grid[i].tau);
  }
}

TEST(RunSweep, OrderAndSeedsIndependentOfWorkers) {
  const std::vector<GridPoint> grid = {{0.125, 540.0}, {0.25, 1200.0}, {0.5, 180.0}};
  ExperimentSpec base;
  base.total_duration = 10800.0 + 6 * 5400.0;
  const auto serial = run_sweep(grid, base, 1);
  const auto parallel = run_sweep(grid, base, 3);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_TRUE(serial[i] == parallel[i]);
    EXPECT_TRUE(serial[i] == run_experiment(sweep_point_spec(base, grid[i], i)));
  }
}

TEST(RunSweep, ErrorNamesGridPoint) {
  ExperimentSpec base;
  base.total_duration = 10800.0 + 6 * 5400.0;
  try {
    run_sweep({{0.25, 1200.0}, {0.25, 1200.5}}, base);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tau=1200.5"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace tclab
