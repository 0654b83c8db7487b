#pragma once

#include <optional>

#include "tclab/thermostat.hpp"

namespace tclab {

/// Two-node thermal model of the conditioned enclosure: an air node and a
/// water node (standing in for the room's solid heat capacity) joined by a
/// heat exchanger, with an envelope conductance to a fixed shell temperature.
struct PlantParams {
  double c_air = 5.0e4;        // J/degC
  double c_water = 3.2e5;      // J/degC
  double ua_wx = 1500.0;       // W/degC, water <-> air
  double ua_shell = 7.0;       // W/degC, air <-> shell
  double t_shell = 24.0;       // degC
  double q_heater_mean = 200.0;  // W into the water
  double p_pump = 75.0;        // W
  double p_fan = 133.0;        // W
  double p_comp = 400.0;       // W electrical while the compressor runs
  double p_acfan = 50.0;       // W electrical, always on
  double eta = 3.0;            // thermal W removed per compressor W

  // Share of the AC fan's electrical power released into the air node.
  double acfan_inside_fraction = 0.0;
  // Share of heater, pump and fan heat deposited into the air node instead of
  // the water node. Non-zero only for single-node test configurations.
  double air_heat_fraction = 0.0;

  /// Steady internal heat load: heater mean plus pump and fan dissipation.
  double internal_load() const { return q_heater_mean + p_pump + p_fan; }
  double extraction() const { return eta * p_comp; }
  /// Duty cycle implied by the time-average energy balance.
  double balance_duty() const { return internal_load() / extraction(); }

  void validate() const;
};

/// Calibrated defaults: 9-minute natural period at duty 408/(eta*p_comp)
/// with the default 0.5 degC dead band.
PlantParams default_plant_params();

struct SimState {
  double t = 0.0;        // s
  double t_air = 24.0;   // degC
  double t_water = 24.0; // degC
  bool compressor_on = false;
  double q_noise = 0.0;  // W, heater offset in force
  double last_switch = 0.0;  // s, time of the most recent relay change
};

struct Rates {
  double d_air;    // degC/s
  double d_water;  // degC/s
};

Rates derivatives(const SimState& state, const PlantParams& params);

/// Advances by dt with classical RK4. A relay edge reached inside the step is
/// located by root finding, the relay flips there and integration resumes
/// with the new state, so the returned relay state agrees with the post-step
/// air temperature. Throws SimulationError on a non-finite result.
SimState step(const SimState& state, const PlantParams& params,
              const ThermostatConfig& thermostat, double dt);

/// Quiescent state at the set point with the water offset that balances the
/// internal load across the heat exchanger.
SimState equilibrium_state(const PlantParams& params, const ThermostatConfig& thermostat);

struct CycleStats {
  double period = 0.0;    // s, mean on-to-on interval
  double duty = 0.0;      // on fraction over the measured cycles
  double mean_on = 0.0;   // s
  double mean_off = 0.0;  // s
  int cycles = 0;
};

struct CycleOptions {
  double dt = 1.0;
  double discard = 3.0 * 3600.0;  // s of transient dropped before measuring
  int min_cycles = 50;
  double max_time = 14.0 * 24 * 3600.0;  // s, give up without enough cycles
};

/// Unmodulated, noise-free limit cycle statistics. Throws SimulationError if
/// fewer than `min_cycles` complete cycles occur before `max_time`.
CycleStats measure_cycles(const PlantParams& params, const ThermostatConfig& thermostat,
                          const CycleOptions& options = {});

/// Mean on+off cycle length in minutes.
double natural_period(const PlantParams& params, const ThermostatConfig& thermostat,
                      const CycleOptions& options = {});

/// Parameters pinned during calibration; unset entries are searched.
struct CalibrationFixed {
  std::optional<double> c_air;
  std::optional<double> ua_wx;
  std::optional<double> p_comp;
};

struct CalibrationResult {
  PlantParams params;
  double period_min = 0.0;
  double duty = 0.0;
  double residual = 0.0;  // max relative error over (period, duty)
  int evaluations = 0;
};

struct CalibrationOptions {
  double tolerance = 1e-3;  // relative, both targets
  double accept = 0.01;     // relative error above which calibration fails
  int max_evaluations = 400;
  CycleOptions cycles{};
};

/// Searches the free members of (c_air, ua_wx, p_comp) so the natural period
/// and duty cycle match the targets. Everything else is taken from `base`,
/// except that the heater, pump and fan wattages are held at 200/75/133 W.
/// Throws SimulationError (with the best residual) when no parameter set gets
/// both observables within `options.accept`.
CalibrationResult calibrate(double target_period_min, double target_duty,
                            const CalibrationFixed& fixed, const PlantParams& base,
                            const ThermostatConfig& thermostat,
                            const CalibrationOptions& options = {});

}  // namespace tclab
