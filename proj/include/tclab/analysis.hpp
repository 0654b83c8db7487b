#pragma once

#include <vector>

#include "tclab/protocol.hpp"

namespace tclab {

/// AC power folded over the complete modulation cycles of a series.
struct CycleAverage {
  double tau = 0.0;  // s
  int n_cycles = 0;
  std::vector<double> phase_grid;  // s offsets within the cycle, spanning [0, tau)
  std::vector<double> p_avg;       // W, mean power at each offset
  std::vector<double> p_sem;       // W, standard error of each mean (0 if n_cycles < 2)
};

/// Folds every complete cycle of every modulated segment onto [0, tau).
/// Cycles start where the commanded set point crosses T_avg rising, i.e. at
/// each modulated segment start and every tau after. Throws AnalysisError if
/// fewer than two complete cycles exist or tau is not a whole number of samples.
CycleAverage cycle_average(const TimeSeries& ts, double tau);

struct Harmonic {
  double magnitude;  // W
  double phase;      // degrees in (-180, 180]; negative lags the set point
};

/// Projection of the cycle average onto sin/cos at k cycles per tau.
/// The phase is relative to sin(2*pi*k*t/tau).
Harmonic harmonic(const CycleAverage& ca, int k);

/// Excess power: (p_mod - q_w_mod/eta) - (p_0 - q_w_0/eta).
constexpr double delta_p(double p_mod, double q_w_mod, double p_0, double q_w_0, double eta) {
  return (p_mod - q_w_mod / eta) - (p_0 - q_w_0 / eta);
}

struct ResponsePoint {
  double delta_t = 0.0;  // degC
  double tau = 0.0;      // s
  double magnitude = 0.0;     // W, first harmonic
  double phase = 0.0;         // degrees
  double h2_magnitude = 0.0;  // W
  double delta_p = 0.0;       // W
  double p_mod = 0.0, p_0 = 0.0, q_w_mod = 0.0, q_w_0 = 0.0;
  int n_cycles = 0;
};

/// Full pipeline for one series: cycle average, harmonics, segment averages, excess power.
ResponsePoint analyze_series(const TimeSeries& ts, double eta);

/// Mean p_ac of each segment with the given label, in order.
std::vector<double> segment_means(const TimeSeries& ts, SegmentLabel label);

/// Baseline of each quiescent segment: mean of p_ac - q_heater/eta over the
/// whole relay cycles inside it (first switch-on to last switch-on), which
/// strips heater noise and the partial cycles cut by the segment edges.
/// Segments with fewer than two switch-ons are skipped.
std::vector<double> quiescent_baselines(const TimeSeries& ts, double eta);

struct BodeRow {
  double delta_t;
  double tau;
  double magnitude;        // W
  double magnitude_per_degc;  // W/degC
  double phase;            // degrees, wrapped to (-180, 180]
  double phase_unwrapped;  // degrees, continuous along each delta_t curve from long tau
};

/// Rows sorted by (delta_t, tau). Throws on empty input or duplicate keys.
std::vector<BodeRow> bode_table(const std::vector<ResponsePoint>& points);

struct Economics {
  double cost_per_hour;    // $
  double income_per_hour;  // $
  double cost_income_ratio;  // +inf when income is zero and cost is not
};

/// Energy cost of the excess power against regulation income for the
/// zero-to-peak response. Prices in $/MWh and $/(MW h).
Economics economics(double response_zero_to_peak, double delta_p, double energy_price,
                    double regulation_price);

/// Wraps an angle in degrees to (-180, 180].
double wrap_degrees(double deg);

}  // namespace tclab
