#pragma once

#include <cstdint>

#include "twinbeam/counts.hpp"
#include "twinbeam/rng.hpp"
#include "twinbeam/source.hpp"

namespace twinbeam {

enum class DeadTimeRegime {
  none,             ///< counter resolves every photon in the gate
  binary_per_pulse  ///< dead time exceeds the pulse: at most one count per gate
};

/// One optical channel plus its detector.
struct ArmConfig {
  double transmission = 1.0;   ///< channel transmission after the crystal, T in [0,1]
  double eta0 = 1.0;           ///< intrinsic detector QE at this arm's wavelength
  double dark_prob = 0.0;      ///< dark/afterpulse click probability per gate, in [0,1)
  double bg_rate = 0.0;        ///< external background count rate, counts/s, non-gated
  double blind_window = 0.0;   ///< seconds before/straddling the gate in which a
                               ///< background event blinds the detector
  DeadTimeRegime dead_time_regime = DeadTimeRegime::binary_per_pulse;

  void validate() const;  // throws InvalidParameterError
};

/// Gating and coincidence-circuit timing. Sub-gate timing detail is folded
/// into the accidental factor K rather than simulated.
struct TimingConfig {
  double gate_width = 30e-9;          ///< s
  double coincidence_window = 4.2e-9; ///< s, must not exceed gate_width
  double rep_rate = 10e3;             ///< pulses/s
  double pulse_width = 5e-9;          ///< s, must not exceed gate_width
  double accidental_factor = 0.65;    ///< K in (0,1]

  void validate() const;
};

/// Per-gate outcome.
struct PulseRecord {
  int c_s = 0;
  int c_i = 0;
  bool coincident = false;
};

/// Mean per-photon detection probability including blinding survival:
/// eta0 * T * max(0, 1 - bg_rate*blind_window).
double effective_qe(const ArmConfig& arm);

/// Detects one gate without injected background counts: a Bernoulli blind
/// with probability min(1, bg_rate*blind_window) suppresses the whole gate,
/// otherwise each photon survives with probability T*eta0 and dark counts
/// add Poisson events with P(>=1) = dark_prob. In binary_per_pulse the gate
/// reports 1 if anything fired, else 0.
int detect_pulse(int photons, const ArmConfig& arm, RngStream& rng);

/// Full gate model: detect_pulse plus background counts falling inside the
/// gate, Poisson with mean bg_rate*gate_width (suppressed when blinded).
int detect_gate(int photons, const ArmConfig& arm, double gate_width, RngStream& rng);

/// Gate-level coincidence: both arms registered at least one count.
inline bool coincide(int c_s, int c_i) { return c_s >= 1 && c_i >= 1; }

/// Per-gate accidental-coincidence probability p_s * p_i * K for per-gate
/// singles probabilities; with run totals N1, N2 the accidental total is
/// N1*N2*K/n_pulses.
double accidental_rate(double p_s, double p_i, const TimingConfig& timing);

struct SimOptions {
  std::int64_t batch_size = 0;  ///< pulses per batch; 0 = max(1, n_pulses/256)
  int threads = 1;              ///< worker threads; never affects the result
};

std::int64_t default_batch_size(std::int64_t n_pulses);

/// Streams n_pulses gates through sample_pulse -> detect_gate -> coincide,
/// accumulating one CountsSummary per batch. Batch b draws from substream b
/// of `seed` and batches merge in index order, so the result is bit-identical
/// for any thread count.
RunResult run_pulses(const SourceConfig& source, const ArmConfig& arm_s,
                     const ArmConfig& arm_i, const TimingConfig& timing,
                     std::int64_t n_pulses, std::uint64_t seed,
                     const SimOptions& options = {});

}  // namespace twinbeam
