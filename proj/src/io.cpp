#include "tclab/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tclab/error.hpp"

namespace tclab {

namespace fs = std::filesystem;

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf.data(), end);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  // from_chars rejects a leading '+', which other writers may emit.
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw IoError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_series_csv(const fs::path& path, const TimeSeries& ts) {
  ts.check_consistent();
  std::ofstream out = open_out(path);
  std::string line;
  out << kSeriesHeader << '\n';
  for (std::size_t i = 0; i < ts.size(); ++i) {
    line.clear();
    line += format_double(ts.time(i));
    for (double v : {ts.p_ac[i], ts.t_air[i], ts.t_water[i], ts.setpoint[i], ts.q_heater[i],
                     ts.compressor_on[i]}) {
      line += ',';
      line += format_double(v);
    }
    line += ',';
    line += to_string(ts.segment[i]);
    line += '\n';
    out << line;
  }
  close_out(out, path);
}

TimeSeries read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSeriesHeader) {
    throw IoError(path.string() + ": unexpected header");
  }
  TimeSeries ts;
  std::size_t row = 1;
  double t0 = 0.0, t1 = 0.0;
  std::array<std::string_view, 8> cells;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::size_t begin = 0, n = 0;
    for (std::size_t i = 0; i <= line.size() && n < cells.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cells[n++] = std::string_view(line).substr(begin, i - begin);
        begin = i + 1;
      }
    }
    if (n != cells.size() || begin <= line.size()) {
      throw IoError(path.string() + ": row " + std::to_string(row) + " needs 8 columns");
    }
    try {
      const double t = parse_double(cells[0]);
      if (ts.size() == 0) t0 = t;
      if (ts.size() == 1) t1 = t;
      ts.p_ac.push_back(parse_double(cells[1]));
      ts.t_air.push_back(parse_double(cells[2]));
      ts.t_water.push_back(parse_double(cells[3]));
      ts.setpoint.push_back(parse_double(cells[4]));
      ts.q_heater.push_back(parse_double(cells[5]));
      ts.compressor_on.push_back(parse_double(cells[6]));
      ts.segment.push_back(parse_segment_label(cells[7]));
    } catch (const IoError& e) {
      throw IoError(path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  if (ts.size() >= 2) ts.dt = t1 - t0;
  return ts;
}

void write_cycle_average_csv(const fs::path& path, const CycleAverage& ca) {
  std::ofstream out = open_out(path);
  out << "phase_s,p_avg_w,p_sem_w\n";
  for (std::size_t j = 0; j < ca.p_avg.size(); ++j) {
    out << format_double(ca.phase_grid[j]) << ',' << format_double(ca.p_avg[j]) << ','
        << format_double(ca.p_sem[j]) << '\n';
  }
  close_out(out, path);
}

void write_bode_csv(const fs::path& path, const std::vector<BodeRow>& rows,
                    const std::vector<ResponsePoint>& points) {
  std::ofstream out = open_out(path);
  out << "delta_t_c,tau_s,tau_min,magnitude_w,magnitude_per_degc,phase_deg,"
         "phase_unwrapped_deg,h2_magnitude_w,n_cycles\n";
  for (const BodeRow& r : rows) {
    auto p = std::find_if(points.begin(), points.end(), [&](const ResponsePoint& q) {
      return q.delta_t == r.delta_t && q.tau == r.tau;
    });
    out << format_double(r.delta_t) << ',' << format_double(r.tau) << ','
        << format_double(r.tau / 60.0) << ',' << format_double(r.magnitude) << ','
        << format_double(r.magnitude_per_degc) << ',' << format_double(r.phase) << ','
        << format_double(r.phase_unwrapped) << ','
        << (p != points.end() ? format_double(p->h2_magnitude) : "nan") << ','
        << (p != points.end() ? p->n_cycles : 0) << '\n';
  }
  close_out(out, path);
}

void write_delta_p_csv(const fs::path& path, const std::vector<ResponsePoint>& points) {
  std::vector<const ResponsePoint*> sorted;
  for (const ResponsePoint& p : points) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const ResponsePoint* a, const ResponsePoint* b) {
    return a->tau != b->tau ? a->tau < b->tau : a->delta_t < b->delta_t;
  });
  std::ofstream out = open_out(path);
  out << "tau_s,delta_t_c,delta_p_w,p_mod_w,p_0_w,q_w_mod_w,q_w_0_w\n";
  for (const ResponsePoint* p : sorted) {
    out << format_double(p->tau) << ',' << format_double(p->delta_t) << ','
        << format_double(p->delta_p) << ',' << format_double(p->p_mod) << ','
        << format_double(p->p_0) << ',' << format_double(p->q_w_mod) << ','
        << format_double(p->q_w_0) << '\n';
  }
  close_out(out, path);
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 1) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string tick_label(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

void write_svg_plot(const fs::path& path, const PlotSpec& plot) {
  constexpr double kWidth = 640, kHeight = 420;
  constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
  static const std::array<const char*, 8> kColors = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};

  auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const PlotSeries& s : plot.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(tx(s.x[i]))) continue;
      x_lo = std::min(x_lo, tx(s.x[i]));
      x_hi = std::max(x_hi, tx(s.x[i]));
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (!(x_hi >= x_lo)) x_lo = 0.0, x_hi = 1.0;
  if (!(y_hi >= y_lo)) y_lo = 0.0, y_hi = 1.0;
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ofstream out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape_xml(plot.title) << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double yv = y_lo + (y_hi - y_lo) * k / 4.0;
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(py(yv) + 4)
        << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
    const double xt = x_lo + (x_hi - x_lo) * k / 4.0;
    const double xv = plot.log_x ? std::pow(10.0, xt) : xt;
    out << "<text x=\"" << fixed(kLeft + pw * k / 4.0) << "\" y=\"" << kTop + ph + 16
        << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\">" << escape_xml(plot.x_label) << "</text>\n";
  out << "<text transform=\"translate(16," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(plot.y_label) << "</text>\n";

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const PlotSeries& ser = plot.series[s];
    const char* color = kColors[s % kColors.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    const std::size_t n = std::min(ser.x.size(), ser.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(ser.y[i])) continue;
      out << fixed(px(ser.x[i]), 2) << ',' << fixed(py(ser.y[i]), 2) << ' ';
    }
    out << "\"/>\n";
    if (n <= 64) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(ser.y[i])) continue;
        out << "<circle cx=\"" << fixed(px(ser.x[i]), 2) << "\" cy=\"" << fixed(py(ser.y[i]), 2)
            << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = kTop + 14 + 18.0 * static_cast<double>(s);
    out << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << kLeft + pw + 30 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + pw + 35 << "\" y=\"" << ly << "\">" << escape_xml(ser.label)
        << "</text>\n";
  }
  out << "</svg>\n";
  close_out(out, path);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : ""));
  }
  const fs::path probe = dir / ".tclab_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace tclab
