#pragma once

#include <cstdint>
#include <vector>

#include "twinbeam/errors.hpp"

namespace twinbeam {

/// Accumulated totals and second moments over a run. For raw simulation
/// output every field is integer-valued (stored in doubles so that
/// background-subtracted summaries fit the same type); integer-valued sums
/// merge exactly, so merge order cannot change the result.
struct CountsSummary {
  std::int64_t n_pulses = 0;
  double n_s = 0.0;           ///< total signal counts
  double n_i = 0.0;           ///< total idler counts
  double n_c = 0.0;           ///< total gate-level coincidences
  double sum_minus = 0.0;     ///< sum of (c_s - c_i) per gate
  double sum_minus_sq = 0.0;  ///< sum of (c_s - c_i)^2 per gate
  double sum_plus = 0.0;      ///< sum of (c_s + c_i) per gate

  void add_gate(int c_s, int c_i, bool coincident) {
    ++n_pulses;
    n_s += c_s;
    n_i += c_i;
    n_c += coincident ? 1.0 : 0.0;
    const double d = static_cast<double>(c_s) - static_cast<double>(c_i);
    sum_minus += d;
    sum_minus_sq += d * d;
    sum_plus += static_cast<double>(c_s) + static_cast<double>(c_i);
  }

  void merge(const CountsSummary& o) {
    n_pulses += o.n_pulses;
    n_s += o.n_s;
    n_i += o.n_i;
    n_c += o.n_c;
    sum_minus += o.sum_minus;
    sum_minus_sq += o.sum_minus_sq;
    sum_plus += o.sum_plus;
  }

  /// Unbiased per-pulse sample variance of (c_s - c_i).
  double var_minus() const {
    if (n_pulses < 2) throw InsufficientDataError("variance needs at least 2 pulses");
    const double n = static_cast<double>(n_pulses);
    const double v = (sum_minus_sq - sum_minus * sum_minus / n) / (n - 1.0);
    return v > 0.0 ? v : 0.0;
  }

  double mean_plus() const {
    if (n_pulses < 1) throw InsufficientDataError("empty summary");
    return sum_plus / static_cast<double>(n_pulses);
  }
};

/// Result of a simulated run: grand totals plus per-batch partial summaries
/// (in batch order), which the block bootstrap resamples.
struct RunResult {
  CountsSummary total;
  std::vector<CountsSummary> blocks;
  std::uint64_t seed = 0;
};

}  // namespace twinbeam
