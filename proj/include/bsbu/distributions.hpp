#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "bsbu/common.hpp"
#include "bsbu/random.hpp"

namespace bsbu {

/// Standard normal CDF through erfc, which keeps full relative precision in
/// the lower tail (N(-9) ~ 1e-19 is resolved, not rounded to zero).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - N(x) without cancellation.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Per-step gross return eps with log eps ~ Normal((r - q - sigma^2/2) delta, sigma^2 delta).
struct LognormalInnovationSpec {
  double r = 0.03;
  double q = 0.01;
  double sigma = 0.15;
  double delta = 1.0 / 12.0;

  void validate() const {
    if (!std::isfinite(r) || !std::isfinite(q) || !std::isfinite(sigma) || !std::isfinite(delta))
      throw ValidationError("LognormalInnovationSpec: non-finite parameter");
    if (sigma < 0.0) throw ValidationError("LognormalInnovationSpec: sigma must be >= 0");
    if (!(delta > 0.0)) throw ValidationError("LognormalInnovationSpec: delta must be > 0");
  }
  double log_mean() const { return (r - q - 0.5 * sigma * sigma) * delta; }
  double log_sd() const { return sigma * std::sqrt(delta); }

  double draw(RandomGenerator& gen) const {
    if (sigma == 0.0) return std::exp(log_mean());
    return std::exp(log_mean() + log_sd() * gen.normal());
  }
};

inline std::vector<double> sample_innovations(const LognormalInnovationSpec& spec, std::size_t count,
                                              const RandomStream& stream) {
  spec.validate();
  if (count == 0) throw ValidationError("sample_innovations: count must be >= 1");
  std::vector<double> out(count);
  RandomGenerator gen = stream.generator();
  for (double& v : out) v = spec.draw(gen);
  return out;
}

}  // namespace bsbu
