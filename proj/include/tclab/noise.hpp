#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tclab {

enum class NoiseShape { uniform, binary };

/// Random step perturbation of the water-heater power.
///
/// Offsets are drawn from Uniform(-amplitude, +amplitude) (or +/-amplitude
/// with equal probability in binary mode) and held for an exponentially
/// distributed interval with mean `mean_hold`.
struct NoiseConfig {
  double amplitude = 100.0;  // W
  double mean_hold = 900.0;  // s
  bool enabled = true;
  NoiseShape shape = NoiseShape::uniform;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Name of the generator algorithm; echoed into run metadata.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64";

/// Deterministic stream backing the noise injector. Variates are built from
/// raw 64-bit outputs so sequences do not depend on the standard library's
/// distribution implementations.
class NoiseRng {
 public:
  explicit NoiseRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool operator==(const NoiseRng&) const = default;

 private:
  std::mt19937_64 engine_;
};

struct NoiseDraw {
  double offset;  // W
  double hold;    // s
};

/// Draws the next heater offset and how long it is held.
NoiseDraw next_offset(const NoiseConfig& config, NoiseRng& rng);

/// splitmix64 finaliser; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Piecewise-constant offset signal driven by next_offset().
class NoiseInjector {
 public:
  explicit NoiseInjector(const NoiseConfig& config)
      : NoiseInjector(config, config.seed) {}
  NoiseInjector(const NoiseConfig& config, std::uint64_t seed)
      : config_(config), rng_(seed) {}

  /// Offset in force at time t. Times must be non-decreasing between calls.
  double offset_at(double t);

 private:
  NoiseConfig config_;
  NoiseRng rng_;
  double current_ = 0.0;
  double next_change_ = 0.0;
};

}  // namespace tclab
