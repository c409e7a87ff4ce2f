#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "twinbeam/errors.hpp"

namespace twinbeam {

/// SplitMix64 finalizer; used to turn (seed, stream index) pairs into
/// well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// A deterministic random stream: std::mt19937_64 (whose output sequence is
/// fixed by the C++ standard, so results are reproducible across platforms)
/// plus the inverse-CDF integer samplers used by the simulation. Output
/// depends only on (seed, stream index, draw order), never on scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Substream `stream` of master seed `seed`; substreams are independent
  /// for distinct indices.
  static RngStream derived(std::uint64_t seed, std::uint64_t stream) {
    return RngStream(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_pos() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Binomial(n, p) as n independent Bernoulli survivals.
  int binomial(int n, double p) {
    if (p <= 0.0 || n <= 0) return 0;
    if (p >= 1.0) return n;
    int k = 0;
    for (int i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

  /// Bose-Einstein (geometric on {0,1,...}) with mean `mu`, by inverting the
  /// closed-form CDF: P(n) = mu^n / (1+mu)^(n+1). Exact, no truncation.
  int bose_einstein(double mu) {
    if (mu <= 0.0) return 0;
    const double log_ratio = std::log(mu) - std::log1p(mu);  // < 0
    const double n = std::floor(std::log(uniform_pos()) / log_ratio);
    return static_cast<int>(n);
  }

  /// Negative binomial: sum of `modes` iid Bose-Einstein(mu) variates,
  /// sampled in one draw by sequential inverse-CDF on the pmf recurrence
  /// P(n+1) = P(n) * (modes+n)/(n+1) * mu/(1+mu).
  int negative_binomial(int modes, double mu) {
    if (modes <= 0 || mu <= 0.0) return 0;
    const double ratio = mu / (1.0 + mu);
    double pmf = std::pow(1.0 + mu, -static_cast<double>(modes));
    double cdf = pmf;
    const double u = uniform();
    int n = 0;
    while (u >= cdf) {
      pmf *= ratio * (static_cast<double>(modes) + n) / (n + 1.0);
      cdf += pmf;
      ++n;
      if (n > 100000000) break;  // unreachable for sane mu; guards fp tails
    }
    return n;
  }

  /// Poisson(mean) by sequential inverse-CDF; means above 30 are split using
  /// Poisson additivity so exp(-mean) never underflows.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    int total = 0;
    while (mean > 30.0) {
      total += poisson_inv(30.0);
      mean -= 30.0;
    }
    return total + poisson_inv(mean);
  }

 private:
  int poisson_inv(double mean) {
    double pmf = std::exp(-mean);
    double cdf = pmf;
    const double u = uniform();
    int n = 0;
    while (u >= cdf) {
      pmf *= mean / (n + 1.0);
      cdf += pmf;
      ++n;
      if (n > 100000000) break;
    }
    return n;
  }

  std::mt19937_64 engine_;
};

}  // namespace twinbeam
