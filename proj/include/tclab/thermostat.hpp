#pragma once

#include <functional>

namespace tclab {

/// Relay thermostat with sinusoidal set-point modulation.
///
/// The set point is T_avg + delta_t * sin(2*pi*(t - phase_origin)/tau) while
/// modulation is enabled and T_avg otherwise. The dead band of width
/// `dead_band` is centred on the set point; each edge may additionally carry
/// an independent time-dependent offset.
struct ThermostatConfig {
  double t_avg = 24.0;      // degC
  double delta_t = 0.0;     // degC, modulation amplitude
  double tau = 1200.0;      // s, modulation period
  double dead_band = 0.5;   // degC, upper edge minus lower edge
  bool modulation_enabled = false;
  double phase_origin = 0.0;  // s, time at which the modulation phase is zero

  // Empty functions mean a zero offset.
  std::function<double(double)> lower_offset;
  std::function<double(double)> upper_offset;

  void validate() const;
};

struct DeadBand {
  double lower;
  double upper;
};

double setpoint(double t, const ThermostatConfig& config);

/// Throws ConfigError if the offsets make the edges cross.
DeadBand dead_band_edges(double t, const ThermostatConfig& config);

/// Hysteresis relay for a cooling load: switches on at or above the upper edge,
/// off at or below the lower edge, and otherwise keeps its state.
constexpr bool relay_update(bool on, double t_air, DeadBand edges) {
  if (t_air >= edges.upper) return true;
  if (t_air <= edges.lower) return false;
  return on;
}

}  // namespace tclab
