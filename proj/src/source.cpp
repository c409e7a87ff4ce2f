#include "twinbeam/source.hpp"

#include <algorithm>
#include <string>

namespace twinbeam {

void SourceConfig::validate() const {
  if (modes < 1) throw InvalidParameterError("modes must be >= 1, got " + std::to_string(modes));
  if (!(mean_per_mode >= 0.0) || !std::isfinite(mean_per_mode))
    throw InvalidParameterError("mean_per_mode must be finite and >= 0");
  if (!(overlap >= 0.0 && overlap <= 1.0))
    throw InvalidParameterError("overlap must lie in [0, 1]");
}

PhotonPair sample_pulse(const SourceConfig& config, RngStream& rng) {
  switch (config.kind) {
    case SourceKind::dark_only:
      return {0, 0};
    case SourceKind::coherent: {
      const double mean = config.modes * config.mean_per_mode;
      const int a = rng.poisson(mean);
      const int b = rng.poisson(mean);
      return {a, b};
    }
    case SourceKind::twin_thermal:
    default: {
      const int matched = config.matched_modes();
      const int unmatched = config.modes - matched;
      // One draw per mode group: a sum of iid Bose-Einstein modes is
      // negative-binomial, so grouping is distribution-identical to
      // per-mode sampling and keeps the hot loop at <= 3 draws per pulse.
      const int shared = rng.negative_binomial(matched, config.mean_per_mode);
      if (unmatched == 0) return {shared, shared};
      const int extra_s = rng.negative_binomial(unmatched, config.mean_per_mode);
      const int extra_i = rng.negative_binomial(unmatched, config.mean_per_mode);
      return {shared + extra_s, shared + extra_i};
    }
  }
}

double aperture_overlap(double d_s, double d_i, double lambda_s, double lambda_i) {
  for (double v : {d_s, d_i, lambda_s, lambda_i}) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidParameterError("aperture_overlap arguments must be positive and finite");
  }
  const double ratio = (d_i * lambda_s) / (d_s * lambda_i);
  return std::min(1.0, ratio * ratio);
}

}  // namespace twinbeam
