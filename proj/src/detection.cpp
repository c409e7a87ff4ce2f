#include "twinbeam/detection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

namespace twinbeam {

void ArmConfig::validate() const {
  if (!(transmission >= 0.0 && transmission <= 1.0))
    throw InvalidParameterError("transmission must lie in [0, 1]");
  if (!(eta0 >= 0.0 && eta0 <= 1.0)) throw InvalidParameterError("eta0 must lie in [0, 1]");
  if (!(dark_prob >= 0.0 && dark_prob < 1.0))
    throw InvalidParameterError("dark_prob must lie in [0, 1)");
  if (!(bg_rate >= 0.0) || !std::isfinite(bg_rate))
    throw InvalidParameterError("bg_rate must be finite and >= 0");
  if (!(blind_window >= 0.0) || !std::isfinite(blind_window))
    throw InvalidParameterError("blind_window must be finite and >= 0");
}

void TimingConfig::validate() const {
  if (!(gate_width > 0.0)) throw InvalidParameterError("gate_width must be positive");
  if (!(coincidence_window > 0.0 && coincidence_window <= gate_width))
    throw InvalidParameterError("coincidence_window must lie in (0, gate_width]");
  if (!(pulse_width > 0.0 && pulse_width <= gate_width))
    throw InvalidParameterError("pulse_width must lie in (0, gate_width]");
  if (!(rep_rate > 0.0)) throw InvalidParameterError("rep_rate must be positive");
  if (!(accidental_factor > 0.0 && accidental_factor <= 1.0))
    throw InvalidParameterError("accidental_factor must lie in (0, 1]");
}

double effective_qe(const ArmConfig& arm) {
  const double survival = std::max(0.0, 1.0 - arm.bg_rate * arm.blind_window);
  return arm.eta0 * arm.transmission * survival;
}

namespace {

// Per-arm constants hoisted out of the pulse loop. Draw order per gate is
// fixed (blind, photon thinning, dark, in-gate background); draws whose
// probability is exactly zero are skipped, which is config-static and so
// keeps the stream deterministic.
struct ArmSampler {
  double p = 0.0;            // T * eta0, per-photon
  double blind_prob = 0.0;   // min(1, bg_rate * blind_window)
  double dark_mean = 0.0;    // Poisson mean with P(>=1) = dark_prob
  double bg_mean = 0.0;      // Poisson mean of in-gate background counts
  bool binary = false;

  ArmSampler(const ArmConfig& arm, double gate_width)
      : p(arm.transmission * arm.eta0),
        blind_prob(std::min(1.0, arm.bg_rate * arm.blind_window)),
        dark_mean(arm.dark_prob > 0.0 ? -std::log1p(-arm.dark_prob) : 0.0),
        bg_mean(arm.bg_rate * gate_width),
        binary(arm.dead_time_regime == DeadTimeRegime::binary_per_pulse) {}

  int gate(int photons, RngStream& rng) const {
    if (blind_prob > 0.0 && rng.bernoulli(blind_prob)) return 0;
    int count = rng.binomial(photons, p);
    if (dark_mean > 0.0) count += rng.poisson(dark_mean);
    if (bg_mean > 0.0) count += rng.poisson(bg_mean);
    if (binary) return count >= 1 ? 1 : 0;
    return count;
  }
};

CountsSummary simulate_batch(const SourceConfig& source, const ArmSampler& samp_s,
                             const ArmSampler& samp_i, std::int64_t n, RngStream rng) {
  CountsSummary out;
  for (std::int64_t k = 0; k < n; ++k) {
    const PhotonPair pair = sample_pulse(source, rng);
    PulseRecord rec;
    rec.c_s = samp_s.gate(pair.n_s, rng);
    rec.c_i = samp_i.gate(pair.n_i, rng);
    rec.coincident = coincide(rec.c_s, rec.c_i);
    out.add_gate(rec.c_s, rec.c_i, rec.coincident);
  }
  return out;
}

}  // namespace

int detect_pulse(int photons, const ArmConfig& arm, RngStream& rng) {
  arm.validate();
  if (photons < 0) throw InvalidParameterError("photon count must be >= 0");
  return ArmSampler(arm, 0.0).gate(photons, rng);
}

int detect_gate(int photons, const ArmConfig& arm, double gate_width, RngStream& rng) {
  arm.validate();
  if (photons < 0) throw InvalidParameterError("photon count must be >= 0");
  if (!(gate_width >= 0.0)) throw InvalidParameterError("gate_width must be >= 0");
  return ArmSampler(arm, gate_width).gate(photons, rng);
}

double accidental_rate(double p_s, double p_i, const TimingConfig& timing) {
  timing.validate();
  if (!(p_s >= 0.0 && p_s <= 1.0) || !(p_i >= 0.0 && p_i <= 1.0))
    throw InvalidParameterError("singles probabilities must lie in [0, 1]");
  return p_s * p_i * timing.accidental_factor;
}

std::int64_t default_batch_size(std::int64_t n_pulses) {
  return std::max<std::int64_t>(1, n_pulses / 256);
}

RunResult run_pulses(const SourceConfig& source, const ArmConfig& arm_s,
                     const ArmConfig& arm_i, const TimingConfig& timing,
                     std::int64_t n_pulses, std::uint64_t seed, const SimOptions& options) {
  source.validate();
  arm_s.validate();
  arm_i.validate();
  timing.validate();
  if (n_pulses < 1) throw InvalidParameterError("n_pulses must be >= 1");

  const std::int64_t batch =
      options.batch_size > 0 ? options.batch_size : default_batch_size(n_pulses);
  const std::size_t n_batches = static_cast<std::size_t>((n_pulses + batch - 1) / batch);
  const ArmSampler samp_s(arm_s, timing.gate_width);
  const ArmSampler samp_i(arm_i, timing.gate_width);

  RunResult result;
  result.seed = seed;
  result.blocks.resize(n_batches);

  auto run_range = [&](std::atomic<std::size_t>& next) {
    for (std::size_t b = next.fetch_add(1); b < n_batches; b = next.fetch_add(1)) {
      const std::int64_t lo = static_cast<std::int64_t>(b) * batch;
      const std::int64_t count = std::min(batch, n_pulses - lo);
      result.blocks[b] =
          simulate_batch(source, samp_s, samp_i, count, RngStream::derived(seed, b));
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1 || n_batches == 1) {
    std::atomic<std::size_t> next{0};
    run_range(next);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = static_cast<int>(std::min<std::size_t>(threads, n_batches));
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back([&] { run_range(next); });
    for (auto& th : pool) th.join();
  }

  // Merge in batch-index order; raw sums are integer-valued so this is exact.
  for (const auto& blk : result.blocks) result.total.merge(blk);
  return result;
}

}  // namespace twinbeam
