#include "tclab/thermostat.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "tclab/error.hpp"

namespace tclab {

void ThermostatConfig::validate() const {
  if (!(dead_band > 0.0)) throw ConfigError("thermostat.dead_band must be > 0");
  if (!(delta_t >= 0.0)) throw ConfigError("thermostat.delta_t must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("thermostat.tau must be > 0");
  if (!std::isfinite(t_avg)) throw ConfigError("thermostat.t_avg must be finite");
}

double setpoint(double t, const ThermostatConfig& config) {
  if (!config.modulation_enabled) return config.t_avg;
  const double phase = 2.0 * std::numbers::pi * (t - config.phase_origin) / config.tau;
  return config.t_avg + config.delta_t * std::sin(phase);
}

DeadBand dead_band_edges(double t, const ThermostatConfig& config) {
  const double sp = setpoint(t, config);
  const double half = 0.5 * config.dead_band;
  DeadBand edges{sp - half, sp + half};
  if (config.lower_offset) edges.lower += config.lower_offset(t);
  if (config.upper_offset) edges.upper += config.upper_offset(t);
  if (!(edges.upper > edges.lower)) {
    std::ostringstream msg;
    msg << "dead band edges out of order at t=" << t << " s (lower " << edges.lower
        << ", upper " << edges.upper << ")";
    throw ConfigError(msg.str());
  }
  return edges;
}

}  // namespace tclab
