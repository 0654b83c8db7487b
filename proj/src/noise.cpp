#include "tclab/noise.hpp"

#include <cmath>

#include "tclab/error.hpp"

namespace tclab {

void NoiseConfig::validate() const {
  if (!(amplitude >= 0.0)) throw ConfigError("noise.amplitude must be >= 0");
  if (!(mean_hold > 0.0)) throw ConfigError("noise.mean_hold must be > 0");
}

NoiseDraw next_offset(const NoiseConfig& config, NoiseRng& rng) {
  const double u = rng.uniform();
  double offset = 0.0;
  switch (config.shape) {
    case NoiseShape::uniform:
      offset = config.amplitude * (2.0 * u - 1.0);
      break;
    case NoiseShape::binary:
      offset = u < 0.5 ? -config.amplitude : config.amplitude;
      break;
  }
  // 1 - u lies in (0, 1], so the log is finite.
  const double hold = -config.mean_hold * std::log(1.0 - rng.uniform());
  return {offset, hold};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double NoiseInjector::offset_at(double t) {
  if (!config_.enabled) return 0.0;
  while (t >= next_change_) {
    const NoiseDraw draw = next_offset(config_, rng_);
    current_ = draw.offset;
    next_change_ += draw.hold;
  }
  return current_;
}

}  // namespace tclab
