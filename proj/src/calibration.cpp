#include "twinbeam/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "twinbeam/rng.hpp"

namespace twinbeam {

namespace {

constexpr double kRootTolerance = 1e-9;
constexpr double kNPlusWarn = 0.05;
constexpr double kNPlusLimit = 0.1;

bool physical_root(double x) { return x > 0.0 && x <= 1.0 + kRootTolerance; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

double klyshko_qe(double n_c, double n_ac, double n_s, double n_bn) {
  if (!(n_ac >= 0.0) || !(n_c >= 0.0))
    throw InvalidParameterError("coincidence totals must be >= 0");
  const double den = n_s - n_bn;
  if (!(den > 0.0))
    throw DegenerateDenominatorError("reference singles do not exceed background noise");
  return (n_c - n_ac) / den;
}

double nrf_empirical(const CountsSummary& summary) {
  if (summary.n_pulses < 2) throw InsufficientDataError("NRF needs at least 2 pulses");
  if (!(summary.sum_plus > 0.0)) throw NoSignalError("sum of counts is zero");
  return summary.var_minus() / summary.mean_plus();
}

double nrf_model(double eta_i, double eta_s, double mean_n_plus, bool dead_time) {
  if (!(eta_i + eta_s > 0.0)) throw InvalidParameterError("eta_i + eta_s must be positive");
  if (!(eta_i > 0.0 && eta_i <= 1.0) || !(eta_s > 0.0 && eta_s <= 1.0))
    throw InvalidParameterError("QEs must lie in (0, 1]");
  if (!(mean_n_plus >= 0.0)) throw InvalidParameterError("mean_n_plus must be >= 0");
  if (dead_time && mean_n_plus > kNPlusLimit)
    throw InvalidParameterError("dead-time model requires mean_n_plus <= " +
                                fmt(kNPlusLimit) + ", got " + fmt(mean_n_plus));

  const double s = eta_i + eta_s;
  const double base = 1.0 - 2.0 * eta_i * eta_s / s;
  if (!dead_time) {
    const double asym = (eta_i - eta_s) / s;
    return base + mean_n_plus * asym * asym;
  }
  const double delta = mean_n_plus * (eta_i * eta_s / s -
                                      (eta_i * eta_i + eta_s * eta_s +
                                       eta_i * eta_i * eta_s * eta_s) / (s * s) +
                                      2.0 * eta_i * eta_i * eta_s * eta_s / (s * s * s));
  return base + delta;
}

double solve_qe_from_nrf(double nrf, double ratio_r, double mean_n_plus, bool dead_time) {
  if (!(ratio_r > 0.0)) throw InvalidParameterError("ratio eta_i/eta_s must be positive");
  if (!(mean_n_plus >= 0.0)) throw InvalidParameterError("mean_n_plus must be >= 0");
  if (!(nrf > 0.0 && nrf < 1.0 + mean_n_plus))
    throw InvalidParameterError("nrf must lie in (0, 1 + mean_n_plus), got " + fmt(nrf));

  const double r = ratio_r;
  if (!dead_time || mean_n_plus == 0.0) {
    // With eta_s = eta_i/r the excess-noise term depends on r only, so the
    // model is linear in eta_i.
    const double asym = (r - 1.0) / (r + 1.0);
    const double eta = 0.5 * (r + 1.0) * (1.0 + mean_n_plus * asym * asym - nrf);
    if (!physical_root(eta))
      throw NoPhysicalSolutionError("QE solution " + fmt(eta) + " outside (0, 1]");
    return std::min(eta, 1.0);
  }

  // Substituting eta_s = eta_i/r into the dead-time model and clearing
  // (r+1)^2 / eta_i^2 denominators leaves A*x^2 + B*x + C = 0 in x = eta_i.
  const double rp1 = r + 1.0;
  const double a = mean_n_plus;
  const double b = rp1 * (2.0 - mean_n_plus) - 2.0 * mean_n_plus * r / rp1;
  const double c = (nrf - 1.0) * rp1 * rp1 + mean_n_plus * (r * r + 1.0);
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0)
    throw InconsistentMeasurementError("dead-time quadratic has no real root");
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  const double roots[2] = {q / a, q != 0.0 ? c / q : 0.0};

  const bool ok0 = physical_root(roots[0]);
  const bool ok1 = physical_root(roots[1]) && roots[1] != roots[0];
  if (ok0 && ok1)
    throw AmbiguousRootError("both quadratic roots lie in (0, 1]: " + fmt(roots[0]) +
                             " and " + fmt(roots[1]));
  if (!ok0 && !ok1)
    throw NoPhysicalSolutionError("no quadratic root in (0, 1]: " + fmt(roots[0]) +
                                  " and " + fmt(roots[1]));
  return std::min(ok0 ? roots[0] : roots[1], 1.0);
}

SubtractionResult subtract_background(const CountsSummary& signal_run,
                                      const CountsSummary& background_run,
                                      const TimingConfig& timing) {
  timing.validate();
  if (signal_run.n_pulses < 2 || background_run.n_pulses < 1)
    throw InsufficientDataError("subtraction needs populated runs");

  SubtractionResult out;
  const double n = static_cast<double>(signal_run.n_pulses);
  const double scale = n / static_cast<double>(background_run.n_pulses);

  CountsSummary& c = out.counts;
  c.n_pulses = signal_run.n_pulses;
  c.n_s = signal_run.n_s - background_run.n_s * scale;
  c.n_i = signal_run.n_i - background_run.n_i * scale;
  c.sum_plus = signal_run.sum_plus - background_run.sum_plus * scale;
  c.sum_minus = signal_run.sum_minus - background_run.sum_minus * scale;

  // Independent noise adds in variance, so the corrected per-pulse
  // difference variance is the plain difference of the two.
  const double var_bg = background_run.n_pulses >= 2 ? background_run.var_minus() : 0.0;
  double var_corr = signal_run.var_minus() - var_bg;
  if (var_corr < 0.0) {
    var_corr = 0.0;
    out.flags.push_back("variance_clamped");
  }
  c.sum_minus_sq = var_corr * (n - 1.0) + c.sum_minus * c.sum_minus / n;

  const double k = timing.accidental_factor;
  const double induced_ac =
      k * (signal_run.n_s * signal_run.n_i - std::max(0.0, c.n_s) * std::max(0.0, c.n_i)) / n;
  c.n_c = signal_run.n_c - induced_ac;

  if (c.n_i <= 0.0) out.flags.push_back("idler_oversubtracted");
  if (!(c.n_s > 0.0) || !(c.sum_plus > 0.0))
    throw OverSubtractionError("background subtraction left no signal");
  return out;
}

double measured_ratio(const CountsSummary& summary) {
  if (!(summary.n_s > 0.0)) throw NoSignalError("no reference singles");
  return summary.n_i / summary.n_s;
}

double block_bootstrap_se(
    std::span<const CountsSummary> signal_blocks,
    std::span<const CountsSummary> background_blocks,
    const std::function<double(const CountsSummary&, const CountsSummary&)>& statistic,
    const BootstrapConfig& config) {
  const std::size_t ns = signal_blocks.size();
  const std::size_t nb = background_blocks.size();
  if (ns < static_cast<std::size_t>(config.min_blocks))
    throw InsufficientDataError("bootstrap needs at least " +
                                std::to_string(config.min_blocks) + " blocks, got " +
                                std::to_string(ns));
  std::int64_t pulses = 0;
  for (const auto& blk : signal_blocks) pulses += blk.n_pulses;
  if (pulses < 100) throw InsufficientDataError("bootstrap needs at least 100 pulses");

  RngStream rng = RngStream::derived(config.seed, 0);
  auto resample = [&rng](std::span<const CountsSummary> blocks) {
    CountsSummary merged;
    const std::size_t k = blocks.size();
    for (std::size_t j = 0; j < k; ++j) {
      const auto idx = std::min(k - 1, static_cast<std::size_t>(rng.uniform() * k));
      merged.merge(blocks[idx]);
    }
    return merged;
  };

  std::vector<double> estimates;
  estimates.reserve(config.replicates);
  for (int rep = 0; rep < config.replicates; ++rep) {
    const CountsSummary sig = resample(signal_blocks);
    const CountsSummary bg = nb > 0 ? resample(background_blocks) : CountsSummary{};
    try {
      estimates.push_back(statistic(sig, bg));
    } catch (const Error&) {
      // a degenerate resample; skip it
    }
  }
  if (estimates.size() < 2)
    throw InconsistentMeasurementError("bootstrap failed on nearly every replicate");

  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= static_cast<double>(estimates.size());
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  return std::sqrt(ss / (static_cast<double>(estimates.size()) - 1.0));
}

double block_bootstrap_se(std::span<const CountsSummary> blocks,
                          const std::function<double(const CountsSummary&)>& statistic,
                          const BootstrapConfig& config) {
  return block_bootstrap_se(
      blocks, {},
      [&statistic](const CountsSummary& sig, const CountsSummary&) { return statistic(sig); },
      config);
}

namespace {

double klyshko_from_pair(const CountsSummary& sig, const CountsSummary& bg,
                         const TimingConfig& timing) {
  const double n = static_cast<double>(sig.n_pulses);
  const double scale = n / static_cast<double>(bg.n_pulses);
  const double n_bn = bg.n_s * scale;
  const double n_ac = accidental_rate(sig.n_s / n, sig.n_i / n, timing) * n;
  return klyshko_qe(sig.n_c, n_ac, sig.n_s, n_bn);
}

double difference_from_pair(const CountsSummary& sig, const CountsSummary& bg,
                            const TimingConfig& timing, bool dead_time) {
  const SubtractionResult sub = subtract_background(sig, bg, timing);
  const double nrf = nrf_empirical(sub.counts);
  const double r = measured_ratio(sub.counts);
  const double n_plus = sub.counts.mean_plus();
  return solve_qe_from_nrf(nrf, r, n_plus, dead_time);
}

}  // namespace

CalibrationResult calibrate_klyshko(const RunResult& signal, const RunResult& background,
                                    const TimingConfig& timing,
                                    const BootstrapConfig& bootstrap) {
  CalibrationResult res;
  res.method = Method::klyshko;

  const CountsSummary& sig = signal.total;
  const double n = static_cast<double>(sig.n_pulses);
  const double n_ac = accidental_rate(sig.n_s / n, sig.n_i / n, timing) * n;
  const double raw = klyshko_from_pair(sig, background.total, timing);

  res.eta = std::clamp(raw, 0.0, 1.0);
  res.mean_n_plus = sig.mean_plus();
  if (raw > 1.0) res.flags.push_back("eta_above_one(raw=" + fmt(raw) + ")");
  if (raw < 0.0) res.flags.push_back("eta_negative(raw=" + fmt(raw) + ")");
  if (n_ac > 0.5 * sig.n_c) res.flags.push_back("accidental_dominated");

  res.std_err = block_bootstrap_se(
      signal.blocks, background.blocks,
      [&timing](const CountsSummary& s, const CountsSummary& b) {
        return klyshko_from_pair(s, b, timing);
      },
      bootstrap);
  return res;
}

CalibrationResult calibrate_difference(const RunResult& signal, const RunResult& background,
                                       const TimingConfig& timing, bool dead_time,
                                       const BootstrapConfig& bootstrap) {
  CalibrationResult res;
  res.method = Method::difference_signal;

  const SubtractionResult sub = subtract_background(signal.total, background.total, timing);
  res.flags = sub.flags;
  const double nrf = nrf_empirical(sub.counts);
  const double r = measured_ratio(sub.counts);
  const double n_plus = sub.counts.mean_plus();
  res.nrf = nrf;
  res.ratio_r = r;
  res.mean_n_plus = n_plus;
  if (dead_time && n_plus > kNPlusLimit)
    throw InvalidParameterError("dead-time correction invalid at mean_n_plus = " + fmt(n_plus));
  if (dead_time && n_plus > kNPlusWarn) res.flags.push_back("n_plus_guard_warn");

  res.eta = solve_qe_from_nrf(nrf, r, n_plus, dead_time);

  res.std_err = block_bootstrap_se(
      signal.blocks, background.blocks,
      [&timing, dead_time](const CountsSummary& s, const CountsSummary& b) {
        return difference_from_pair(s, b, timing, dead_time);
      },
      bootstrap);

  const double nrf_se = block_bootstrap_se(
      signal.blocks, background.blocks,
      [&timing](const CountsSummary& s, const CountsSummary& b) {
        return nrf_empirical(subtract_background(s, b, timing).counts);
      },
      bootstrap);
  if (nrf + 3.0 * nrf_se >= 1.0) res.flags.push_back("no_squeezing");
  return res;
}

}  // namespace twinbeam
