#include "twinbeam/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace twinbeam {

TruncationSpec TruncationSpec::for_tail(double mu, double tail_bound) {
  if (!(tail_bound > 0.0 && tail_bound < 1.0))
    throw InvalidParameterError("tail_bound must lie in (0, 1)");
  if (!(mu >= 0.0)) throw InvalidParameterError("mu must be >= 0");
  TruncationSpec spec;
  spec.tail_bound = tail_bound;
  if (mu > 0.0) {
    const double log_ratio = std::log(mu) - std::log1p(mu);
    spec.n_max = static_cast<int>(std::ceil(std::log(tail_bound) / log_ratio)) + 1;
  }
  return spec;
}

void TruncationSpec::validate(double mu) const {
  if (n_max < 0) throw InvalidParameterError("n_max must be >= 0");
  if (!(tail_bound > 0.0)) throw InvalidParameterError("tail_bound must be positive");
  if (mu <= 0.0) return;
  const double log_ratio = std::log(mu) - std::log1p(mu);
  const double residual = std::exp((n_max + 1) * log_ratio);
  if (residual > tail_bound)
    throw InvalidParameterError("truncation residual " + std::to_string(residual) +
                                " exceeds tail_bound");
}

double exact_click_prob(int modes, double mu, double p) {
  if (modes < 1) throw InvalidParameterError("modes must be >= 1");
  if (!(mu >= 0.0)) throw InvalidParameterError("mu must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameterError("p must lie in [0, 1]");
  return 1.0 - std::pow(1.0 + mu * p, -static_cast<double>(modes));
}

double negative_binomial_pmf(int modes, double mu, int n) {
  if (modes < 1 || n < 0) throw InvalidParameterError("negative_binomial_pmf domain error");
  if (mu <= 0.0) return n == 0 ? 1.0 : 0.0;
  const double m = static_cast<double>(modes);
  const double log_pmf = std::lgamma(n + m) - std::lgamma(m) - std::lgamma(n + 1.0) +
                         n * std::log(mu) - (n + m) * std::log1p(mu);
  return std::exp(log_pmf);
}

namespace {

std::vector<double> bose_einstein_pmf(double mu, int n_max) {
  std::vector<double> pmf(static_cast<std::size_t>(n_max) + 1, 0.0);
  if (mu <= 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  const double ratio = mu / (1.0 + mu);
  pmf[0] = 1.0 / (1.0 + mu);
  for (int n = 1; n <= n_max; ++n) pmf[n] = pmf[n - 1] * ratio;
  return pmf;
}

// Binomial(n, p) pmf row via the multiplicative recurrence.
std::vector<double> binomial_pmf_row(int n, double p) {
  std::vector<double> row(static_cast<std::size_t>(n) + 1, 0.0);
  if (p <= 0.0) {
    row[0] = 1.0;
    return row;
  }
  if (p >= 1.0) {
    row[n] = 1.0;
    return row;
  }
  row[0] = std::pow(1.0 - p, n);
  const double odds = p / (1.0 - p);
  for (int k = 0; k < n; ++k) row[k + 1] = row[k] * odds * (n - k) / (k + 1.0);
  return row;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// Dense joint distribution over (c_s, c_i); row index is c_s.
struct Joint {
  std::size_t rows = 1, cols = 1;
  std::vector<double> p{1.0};  // delta at (0, 0)

  double& at(std::size_t s, std::size_t i) { return p[s * cols + i]; }
  double at(std::size_t s, std::size_t i) const { return p[s * cols + i]; }
};

Joint convolve_joint(const Joint& a, const Joint& b) {
  Joint out;
  out.rows = a.rows + b.rows - 1;
  out.cols = a.cols + b.cols - 1;
  out.p.assign(out.rows * out.cols, 0.0);
  for (std::size_t as = 0; as < a.rows; ++as)
    for (std::size_t ai = 0; ai < a.cols; ++ai) {
      const double w = a.at(as, ai);
      if (w == 0.0) continue;
      for (std::size_t bs = 0; bs < b.rows; ++bs)
        for (std::size_t bi = 0; bi < b.cols; ++bi)
          out.at(as + bs, ai + bi) += w * b.at(bs, bi);
    }
  return out;
}

// Convolve a marginal distribution into one axis of the joint.
Joint convolve_axis(const Joint& a, const std::vector<double>& marginal, bool signal_axis) {
  Joint out;
  out.rows = a.rows + (signal_axis ? marginal.size() - 1 : 0);
  out.cols = a.cols + (signal_axis ? 0 : marginal.size() - 1);
  out.p.assign(out.rows * out.cols, 0.0);
  for (std::size_t as = 0; as < a.rows; ++as)
    for (std::size_t ai = 0; ai < a.cols; ++ai) {
      const double w = a.at(as, ai);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < marginal.size(); ++k) {
        if (signal_axis)
          out.at(as + k, ai) += w * marginal[k];
        else
          out.at(as, ai + k) += w * marginal[k];
      }
    }
  return out;
}

// Joint count distribution of one matched mode: the pair shares a photon
// number n ~ BE(mu) and each side is thinned independently.
Joint matched_mode_joint(const std::vector<double>& be, double p_s, double p_i) {
  const int n_max = static_cast<int>(be.size()) - 1;
  Joint out;
  out.rows = out.cols = static_cast<std::size_t>(n_max) + 1;
  out.p.assign(out.rows * out.cols, 0.0);
  for (int n = 0; n <= n_max; ++n) {
    if (be[n] == 0.0) continue;
    const auto thin_s = binomial_pmf_row(n, p_s);
    const auto thin_i = binomial_pmf_row(n, p_i);
    for (int cs = 0; cs <= n; ++cs)
      for (int ci = 0; ci <= n; ++ci) out.at(cs, ci) += be[n] * thin_s[cs] * thin_i[ci];
  }
  return out;
}

// Thinned count marginal of one unmatched thermal mode.
std::vector<double> thinned_mode_marginal(const std::vector<double>& be, double p) {
  const int n_max = static_cast<int>(be.size()) - 1;
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int n = 0; n <= n_max; ++n) {
    if (be[n] == 0.0) continue;
    const auto thin = binomial_pmf_row(n, p);
    for (int c = 0; c <= n; ++c) out[c] += be[n] * thin[c];
  }
  return out;
}

std::vector<double> poisson_pmf_to_tail(double mean, double tail_bound) {
  std::vector<double> pmf;
  double term = std::exp(-mean);
  double cum = term;
  pmf.push_back(term);
  int n = 0;
  while (1.0 - cum > tail_bound && n < 100000) {
    ++n;
    term *= mean / n;
    cum += term;
    pmf.push_back(term);
  }
  return pmf;
}

JointMoments moments_from_joint(const Joint& joint, DeadTimeRegime regime) {
  double mass = 0.0, mean_s = 0.0, mean_i = 0.0, mean_d = 0.0, mean_d2 = 0.0, pc = 0.0;
  for (std::size_t s = 0; s < joint.rows; ++s)
    for (std::size_t i = 0; i < joint.cols; ++i) {
      const double w = joint.at(s, i);
      if (w == 0.0) continue;
      double cs = static_cast<double>(s), ci = static_cast<double>(i);
      if (regime == DeadTimeRegime::binary_per_pulse) {
        cs = cs >= 1.0 ? 1.0 : 0.0;
        ci = ci >= 1.0 ? 1.0 : 0.0;
      }
      mass += w;
      mean_s += w * cs;
      mean_i += w * ci;
      const double d = cs - ci;
      mean_d += w * d;
      mean_d2 += w * d * d;
      if (cs >= 1.0 && ci >= 1.0) pc += w;
    }
  JointMoments m;
  m.mass_deficit = 1.0 - mass;
  m.mean_s = mean_s;
  m.mean_i = mean_i;
  m.mean_plus = mean_s + mean_i;
  m.var_minus = mean_d2 - mean_d * mean_d;
  m.coincidence_prob = pc;
  return m;
}

}  // namespace

JointMoments exact_joint_moments(const SourceConfig& source, double p_s, double p_i,
                                 DeadTimeRegime regime, const TruncationSpec& trunc) {
  source.validate();
  if (!(p_s >= 0.0 && p_s <= 1.0) || !(p_i >= 0.0 && p_i <= 1.0))
    throw InvalidParameterError("detection probabilities must lie in [0, 1]");
  if (source.modes > 5)
    throw BudgetExceededError("exact enumeration is guarded to modes <= 5, got " +
                              std::to_string(source.modes));
  trunc.validate(source.mean_per_mode);

  Joint joint;  // starts as a delta at (0, 0)
  switch (source.kind) {
    case SourceKind::dark_only:
      break;
    case SourceKind::coherent: {
      const double mean = source.modes * source.mean_per_mode;
      const auto base = poisson_pmf_to_tail(mean, trunc.tail_bound);
      std::vector<double> arm(base.size(), 0.0);
      for (std::size_t n = 0; n < base.size(); ++n) {
        const auto thin_s = binomial_pmf_row(static_cast<int>(n), p_s);
        for (std::size_t c = 0; c < thin_s.size(); ++c) arm[c] += base[n] * thin_s[c];
      }
      std::vector<double> arm_i_pmf(base.size(), 0.0);
      for (std::size_t n = 0; n < base.size(); ++n) {
        const auto thin_i = binomial_pmf_row(static_cast<int>(n), p_i);
        for (std::size_t c = 0; c < thin_i.size(); ++c) arm_i_pmf[c] += base[n] * thin_i[c];
      }
      joint = convolve_axis(joint, arm, /*signal_axis=*/true);
      joint = convolve_axis(joint, arm_i_pmf, /*signal_axis=*/false);
      break;
    }
    case SourceKind::twin_thermal: {
      const auto be = bose_einstein_pmf(source.mean_per_mode, trunc.n_max);
      const int matched = source.matched_modes();
      const int unmatched = source.modes - matched;
      if (matched > 0) {
        const Joint mode = matched_mode_joint(be, p_s, p_i);
        for (int k = 0; k < matched; ++k) joint = convolve_joint(joint, mode);
      }
      if (unmatched > 0) {
        const auto marg_s = thinned_mode_marginal(be, p_s);
        const auto marg_i = thinned_mode_marginal(be, p_i);
        for (int k = 0; k < unmatched; ++k) {
          joint = convolve_axis(joint, marg_s, /*signal_axis=*/true);
          joint = convolve_axis(joint, marg_i, /*signal_axis=*/false);
        }
      }
      break;
    }
  }
  return moments_from_joint(joint, regime);
}

std::vector<double> negative_binomial_pmf_by_convolution(int modes, double mu, int n_max) {
  if (modes < 1 || n_max < 0)
    throw InvalidParameterError("negative_binomial_pmf_by_convolution domain error");
  const auto be = bose_einstein_pmf(mu, n_max);
  std::vector<double> pmf{1.0};
  for (int m = 0; m < modes; ++m) pmf = convolve(pmf, be);
  pmf.resize(static_cast<std::size_t>(n_max) + 1);
  return pmf;
}

}  // namespace twinbeam
