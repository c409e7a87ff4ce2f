#pragma once

#include <vector>

#include "twinbeam/detection.hpp"
#include "twinbeam/source.hpp"

namespace twinbeam {

/// Per-mode photon-number cutoff with a certified tail bound.
struct TruncationSpec {
  int n_max = 0;
  double tail_bound = 1e-12;

  /// Smallest cutoff (plus margin) whose Bose-Einstein residual
  /// (mu/(1+mu))^(n_max+1) is below tail_bound.
  static TruncationSpec for_tail(double mu, double tail_bound);

  void validate(double mu) const;  // throws InvalidParameterError
};

/// Exact moments of the per-gate count pair, by enumerating the joint
/// photon-number distribution mode group by mode group, thinning each photon
/// with its arm's detection probability, and convolving in count space.
struct JointMoments {
  double mean_s = 0.0;
  double mean_i = 0.0;
  double var_minus = 0.0;
  double mean_plus = 0.0;
  double coincidence_prob = 0.0;
  double mass_deficit = 0.0;  ///< 1 - enumerated probability mass
};

/// Exact probability that a binary (one-count-per-gate) detector clicks on
/// multimode thermal light, via the PGF G(s) = (1 + mu(1-s))^(-M):
/// 1 - G(1-p) = 1 - (1 + mu*p)^(-M).
double exact_click_prob(int modes, double mu, double p);

/// Closed-form pmf of the per-arm photon number for M thermal modes
/// (negative binomial), evaluated through lgamma.
double negative_binomial_pmf(int modes, double mu, int n);

/// Pmf of the same law built independently by convolving M geometric pmfs;
/// cross-checks negative_binomial_pmf and the sampler.
std::vector<double> negative_binomial_pmf_by_convolution(int modes, double mu, int n_max);

/// Enumerated joint count distribution moments for a source seen through
/// detection probabilities p_s, p_i (no dark counts or background). Guarded
/// to modes <= 5; larger instances are the Monte Carlo path's job.
JointMoments exact_joint_moments(const SourceConfig& source, double p_s, double p_i,
                                 DeadTimeRegime regime, const TruncationSpec& trunc);

}  // namespace twinbeam
