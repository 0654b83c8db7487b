#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tclab/analysis.hpp"
#include "tclab/protocol.hpp"

namespace tclab {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Throws IoError if `text` is not entirely a number.
double parse_double(std::string_view text);

inline constexpr std::string_view kSeriesHeader =
    "time_s,p_ac_w,t_air_c,t_water_c,setpoint_c,q_heater_w,on,segment";

void write_series_csv(const std::filesystem::path& path, const TimeSeries& ts);

/// Reads a file written by write_series_csv. Only the sampled channels are
/// stored in the file; tau, delta_t and t_avg are left for the caller.
TimeSeries read_series_csv(const std::filesystem::path& path);

void write_cycle_average_csv(const std::filesystem::path& path, const CycleAverage& ca);

void write_bode_csv(const std::filesystem::path& path, const std::vector<BodeRow>& rows,
                    const std::vector<ResponsePoint>& points);

void write_delta_p_csv(const std::filesystem::path& path,
                       const std::vector<ResponsePoint>& points);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<PlotSeries> series;
};

/// Static line plot with markers.
void write_svg_plot(const std::filesystem::path& path, const PlotSpec& plot);

/// Creates the directory (and parents). Throws IoError if that fails or the
/// path is not writable.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace tclab
