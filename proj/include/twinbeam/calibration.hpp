#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twinbeam/counts.hpp"
#include "twinbeam/detection.hpp"

namespace twinbeam {

enum class Method { klyshko, difference_signal };

/// One absolute-calibration estimate of the idler-channel QE.
struct CalibrationResult {
  double eta = 0.0;
  double std_err = 0.0;
  Method method = Method::klyshko;
  std::optional<double> nrf;          ///< measured noise reduction factor (difference method)
  std::optional<double> ratio_r;      ///< eta_i / eta_s estimate used by the solve
  std::optional<double> mean_n_plus;  ///< mean per-gate count sum
  std::vector<std::string> flags;     ///< warnings; empty on a clean estimate
};

/// Coincidence-ratio QE: (N_c - N_ac) / (N_s - N_bn). Returns the raw ratio;
/// values outside [0, 1] are the caller's to flag. Throws
/// DegenerateDenominatorError when N_s <= N_bn.
double klyshko_qe(double n_c, double n_ac, double n_s, double n_bn);

/// Measured noise reduction factor Var(c_s - c_i) / mean(c_s + c_i) with the
/// unbiased per-pulse sample variance.
double nrf_empirical(const CountsSummary& summary);

/// Model NRF for channel QEs (eta_i, eta_s) at mean sum count mean_n_plus.
/// dead_time=false: 1 - 2*ei*es/(ei+es) + N+*((ei-es)/(ei+es))^2.
/// dead_time=true replaces the third term with the one-count-per-gate
/// correction  N+*[ei*es/S - (ei^2+es^2+ei^2*es^2)/S^2 + 2*ei^2*es^2/S^3],
/// S = ei+es, valid for mean_n_plus << 1 (guarded at 0.1).
double nrf_model(double eta_i, double eta_s, double mean_n_plus, bool dead_time);

/// Inverts nrf_model for eta_i given the measured ratio r = eta_i/eta_s.
/// Without dead time the third term is constant in eta_i and the solve is the
/// closed linear form; with dead time it is a quadratic whose unique root in
/// (0, 1] is returned. Throws NoPhysicalSolutionError / AmbiguousRootError /
/// InconsistentMeasurementError as the root structure dictates.
double solve_qe_from_nrf(double nrf, double ratio_r, double mean_n_plus, bool dead_time);

struct SubtractionResult {
  CountsSummary counts;
  std::vector<std::string> flags;
};

/// Removes the additive contribution of a dark/background run taken with the
/// source blocked: means subtract directly, the difference variance subtracts
/// (independent noise adds in variance), and coincidences drop the
/// background-induced accidentals K*(N_s*N_i - N_s'*N_i')/n. Throws
/// OverSubtractionError when a downstream denominator goes nonpositive.
SubtractionResult subtract_background(const CountsSummary& signal_run,
                                      const CountsSummary& background_run,
                                      const TimingConfig& timing);

/// eta_i/eta_s estimate from singles totals N_i/N_s (matched modes carry
/// identical pre-detection photon numbers, so the ratio of thinned means is
/// the ratio of QEs).
double measured_ratio(const CountsSummary& summary);

struct BootstrapConfig {
  int replicates = 200;
  int min_blocks = 50;
  std::uint64_t seed = 0x0bb07;
};

/// Block-bootstrap standard error of a statistic of a (signal, background)
/// run pair; blocks are resampled with replacement, independently per run.
double block_bootstrap_se(
    std::span<const CountsSummary> signal_blocks,
    std::span<const CountsSummary> background_blocks,
    const std::function<double(const CountsSummary&, const CountsSummary&)>& statistic,
    const BootstrapConfig& config = {});

/// Single-run overload.
double block_bootstrap_se(std::span<const CountsSummary> blocks,
                          const std::function<double(const CountsSummary&)>& statistic,
                          const BootstrapConfig& config = {});

/// Full coincidence-ratio calibration of a run pair: accidentals from the
/// raw singles product, reference-channel background from the dark run,
/// bootstrap standard error, out-of-range results clamped and flagged.
CalibrationResult calibrate_klyshko(const RunResult& signal, const RunResult& background,
                                    const TimingConfig& timing,
                                    const BootstrapConfig& bootstrap = {});

/// Full difference-signal calibration: background subtraction, empirical NRF,
/// measured ratio, then the (dead-time-corrected) model inversion.
CalibrationResult calibrate_difference(const RunResult& signal, const RunResult& background,
                                       const TimingConfig& timing, bool dead_time,
                                       const BootstrapConfig& bootstrap = {});

}  // namespace twinbeam
