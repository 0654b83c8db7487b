#include "tclab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "tclab/error.hpp"

namespace tclab {

CycleAverage cycle_average(const TimeSeries& ts, double tau) {
  ts.check_consistent();
  if (!(tau > 0.0)) throw AnalysisError("cycle_average: tau must be > 0");
  const double ratio = tau / ts.dt;
  const double rounded = std::round(ratio);
  if (rounded < 2.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    throw AnalysisError("cycle_average: tau must be a whole number (>= 2) of samples");
  }
  const auto period = static_cast<std::size_t>(rounded);

  std::vector<std::size_t> starts;
  for (const SegmentSpan& span : segment_spans(ts)) {
    if (span.label != SegmentLabel::modulated) continue;
    for (std::size_t s = span.begin; s + period <= span.end; s += period) starts.push_back(s);
  }
  if (starts.size() < 2) {
    std::ostringstream msg;
    msg << "cycle_average: need at least 2 complete modulation cycles, found " << starts.size();
    throw AnalysisError(msg.str());
  }

  CycleAverage ca;
  ca.tau = tau;
  ca.n_cycles = static_cast<int>(starts.size());
  ca.phase_grid.resize(period);
  ca.p_avg.assign(period, 0.0);
  ca.p_sem.assign(period, 0.0);
  for (std::size_t j = 0; j < period; ++j) ca.phase_grid[j] = static_cast<double>(j) * ts.dt;

  // Two passes per offset keep the variance free of cancellation.
  const double n = static_cast<double>(starts.size());
  for (std::size_t s : starts) {
    for (std::size_t j = 0; j < period; ++j) ca.p_avg[j] += ts.p_ac[s + j];
  }
  for (double& v : ca.p_avg) v /= n;
  for (std::size_t s : starts) {
    for (std::size_t j = 0; j < period; ++j) {
      const double d = ts.p_ac[s + j] - ca.p_avg[j];
      ca.p_sem[j] += d * d;
    }
  }
  for (double& v : ca.p_sem) v = std::sqrt(v / (n - 1.0) / n);
  return ca;
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

Harmonic harmonic(const CycleAverage& ca, int k) {
  if (k < 1) throw AnalysisError("harmonic order must be >= 1");
  const std::size_t n = ca.p_avg.size();
  if (n == 0) throw AnalysisError("harmonic: empty cycle average");
  double c = 0.0, s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(j) / static_cast<double>(n);
    c += ca.p_avg[j] * std::cos(theta);
    s += ca.p_avg[j] * std::sin(theta);
  }
  c *= 2.0 / static_cast<double>(n);
  s *= 2.0 / static_cast<double>(n);
  // p ~ s*sin(theta) + c*cos(theta) = M*sin(theta + phi)
  const double phase = std::atan2(c, s) * 180.0 / std::numbers::pi;
  return {std::hypot(c, s), wrap_degrees(phase)};
}

ResponsePoint analyze_series(const TimeSeries& ts, double eta) {
  const CycleAverage ca = cycle_average(ts, ts.tau);
  const Harmonic h1 = harmonic(ca, 1);
  const Harmonic h2 = harmonic(ca, 2);
  const SegmentAverages avg = segment_averages(ts);
  ResponsePoint r;
  r.delta_t = ts.delta_t;
  r.tau = ts.tau;
  r.magnitude = h1.magnitude;
  r.phase = h1.phase;
  r.h2_magnitude = h2.magnitude;
  r.p_mod = avg.p_mod;
  r.p_0 = avg.p_0;
  r.q_w_mod = avg.q_w_mod;
  r.q_w_0 = avg.q_w_0;
  r.delta_p = delta_p(avg.p_mod, avg.q_w_mod, avg.p_0, avg.q_w_0, eta);
  r.n_cycles = ca.n_cycles;
  return r;
}

std::vector<double> segment_means(const TimeSeries& ts, SegmentLabel label) {
  ts.check_consistent();
  std::vector<double> means;
  for (const SegmentSpan& span : segment_spans(ts)) {
    if (span.label != label) continue;
    double sum = 0.0;
    for (std::size_t i = span.begin; i < span.end; ++i) sum += ts.p_ac[i];
    means.push_back(sum / static_cast<double>(span.end - span.begin));
  }
  return means;
}

std::vector<double> quiescent_baselines(const TimeSeries& ts, double eta) {
  ts.check_consistent();
  if (!(eta > 0.0)) throw AnalysisError("quiescent_baselines: eta must be > 0");
  std::vector<double> baselines;
  for (const SegmentSpan& span : segment_spans(ts)) {
    if (span.label != SegmentLabel::quiescent) continue;
    std::size_t first = span.end, last = span.end;
    for (std::size_t i = std::max<std::size_t>(span.begin, 1); i < span.end; ++i) {
      if (ts.compressor_on[i] > 0.5 && ts.compressor_on[i - 1] <= 0.5) {
        if (first == span.end) first = i;
        last = i;
      }
    }
    if (first == span.end || last == first) continue;
    double sum = 0.0;
    for (std::size_t i = first; i < last; ++i) sum += ts.p_ac[i] - ts.q_heater[i] / eta;
    baselines.push_back(sum / static_cast<double>(last - first));
  }
  return baselines;
}

std::vector<BodeRow> bode_table(const std::vector<ResponsePoint>& points) {
  if (points.empty()) throw AnalysisError("bode_table: no response points");
  std::map<std::pair<double, double>, const ResponsePoint*> keyed;
  for (const ResponsePoint& p : points) {
    if (!keyed.emplace(std::pair{p.delta_t, p.tau}, &p).second) {
      std::ostringstream msg;
      msg << "bode_table: duplicate point (delta_t=" << p.delta_t << ", tau=" << p.tau << ")";
      throw AnalysisError(msg.str());
    }
  }

  std::vector<BodeRow> rows;
  rows.reserve(keyed.size());
  for (const auto& [key, p] : keyed) {
    const double per_degc = p->delta_t > 0.0 ? p->magnitude / p->delta_t
                                             : std::numeric_limits<double>::quiet_NaN();
    rows.push_back({p->delta_t, p->tau, p->magnitude, per_degc, wrap_degrees(p->phase),
                    wrap_degrees(p->phase)});
  }

  // Unwrap each amplitude's curve walking from the longest period inwards.
  for (std::size_t begin = 0; begin < rows.size();) {
    std::size_t end = begin;
    while (end < rows.size() && rows[end].delta_t == rows[begin].delta_t) ++end;
    for (std::size_t i = end - 1; i > begin; --i) {
      const double prev = rows[i].phase_unwrapped;
      double next = rows[i - 1].phase;
      while (next - prev > 180.0) next -= 360.0;
      while (next - prev <= -180.0) next += 360.0;
      rows[i - 1].phase_unwrapped = next;
    }
    begin = end;
  }
  return rows;
}

Economics economics(double response_zero_to_peak, double delta_p, double energy_price,
                    double regulation_price) {
  if (energy_price < 0.0 || regulation_price < 0.0) {
    throw AnalysisError("economics: prices must be >= 0");
  }
  constexpr double kWattsPerMegawatt = 1e6;
  const double cost_units = delta_p * energy_price;
  const double income_units = response_zero_to_peak * regulation_price;
  Economics e;
  e.cost_per_hour = cost_units / kWattsPerMegawatt;
  e.income_per_hour = income_units / kWattsPerMegawatt;
  if (cost_units == 0.0) {
    e.cost_income_ratio = 0.0;
  } else if (income_units == 0.0) {
    e.cost_income_ratio = std::numeric_limits<double>::infinity();
  } else {
    e.cost_income_ratio = cost_units / income_units;
  }
  return e;
}

}  // namespace tclab
