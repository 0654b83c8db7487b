#pragma once

#include <stdexcept>
#include <string>

namespace tclab {

/// Invalid parameters, malformed configuration documents, schema violations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failures while integrating a plant (non-finite state, plant cannot cycle,
/// calibration that does not converge).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data is present but cannot support the requested analysis.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing result files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tclab
