#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tclab/ensemble.hpp"
#include "tclab/plant.hpp"
#include "tclab/protocol.hpp"

namespace tclab {

inline constexpr std::string_view kSoftwareName = "tclab";
inline constexpr std::string_view kSoftwareVersion = "0.1.0";

struct CalibrationTargets {
  double target_period_min = 9.0;
  double target_duty = 0.34;
  CalibrationFixed fixed{};
};

struct AnalysisConfig {
  double energy_price = 200.0;     // $/MWh
  double regulation_price = 40.0;  // $/(MW h)
  bool svg = false;
};

struct EnsembleConfig {
  std::size_t n_units = 500;
  std::size_t segments = 2;
  std::uint64_t seed = 1;
  InitRandomization init{};
  double n_sigma = 3.0;
  bool compare_single = true;
};

/// Everything a command needs, resolved with defaults filled in.
struct RunConfig {
  ExperimentSpec experiment{};
  std::vector<GridPoint> grid;  // empty: one run at experiment.delta_t / tau
  std::optional<CalibrationTargets> calibration;
  EnsembleConfig ensemble{};
  AnalysisConfig analysis{};
  std::string output_dir;  // empty: chosen by the CLI
  unsigned workers = 0;

  /// Grid actually executed.
  std::vector<GridPoint> effective_grid() const;
};

/// Parses and validates a config document. Unknown keys, wrong types and
/// invalid values raise ConfigError naming the offending field.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads a config file or a run manifest (whose "config" member is used).
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved config, every default included.
nlohmann::json config_to_json(const RunConfig& config);

nlohmann::json plant_to_json(const PlantParams& params);

/// Distribution, RNG, seeding and phase conventions; written into every manifest.
nlohmann::json convention_metadata();

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace tclab
