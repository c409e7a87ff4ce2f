#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "twinbeam/calibration.hpp"

namespace twinbeam {

enum class SweepKind { none, transmission, background, wavelength, brightness };

/// Aperture geometry used to derive the conjugate-mode overlap fraction.
struct Geometry {
  double d_s_mm = 5.0;
  double d_i_mm = 6.0;
  double lambda_s_nm = 650.0;
  double lambda_i_nm = 780.0;
};

/// One sweep description: base configuration plus the parameter axis.
struct Scenario {
  std::string name = "default";
  SweepKind sweep = SweepKind::none;
  std::vector<double> sweep_values;
  SourceConfig source;
  ArmConfig arm_s;
  ArmConfig arm_i;
  TimingConfig timing;
  std::optional<Geometry> geometry;
  std::vector<std::pair<double, double>> qe_curve;  ///< (wavelength nm, eta0), sorted
  std::int64_t n_pulses = 1000000;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

/// Piecewise-linear interpolation of a QE curve; wavelengths outside the
/// table are a configuration error.
double interp_qe_curve(const std::vector<std::pair<double, double>>& curve, double lambda_nm);

/// One CSV row. Estimator failures leave the value fields empty and put an
/// error token into flags.
struct ResultRow {
  std::string scenario;
  std::string sweep_param;
  double sweep_value = 0.0;
  std::string method;
  std::optional<double> eta;
  std::optional<double> std_err;
  std::optional<double> nrf;
  std::optional<double> ratio_r;
  std::optional<double> mean_n_plus;
  std::int64_t n_s = 0;
  std::int64_t n_i = 0;
  std::int64_t n_c = 0;
  std::int64_t n_pulses = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> flags;
};

struct RunOverrides {
  std::optional<std::int64_t> n_pulses;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

/// Runs every sweep point: signal run, paired dark run, background
/// subtraction, both estimators. Two rows per point, in sweep order.
std::vector<ResultRow> run_scenario(const Scenario& scenario, const RunOverrides& overrides = {});

/// Renders the result table with the fixed header, shortest round-trip
/// decimals and LF line endings.
std::string render_csv(const std::vector<ResultRow>& table);

/// Writes render_csv(table) to `path`; an empty table is an error and
/// creates no file.
void emit_csv(const std::vector<ResultRow>& table, const std::filesystem::path& path);

/// Pre-flight cross-check of the Monte Carlo chain against the exact
/// enumeration oracle on small configurations. Logs one line per check;
/// returns false on any disagreement.
bool verify_against_oracle(std::ostream& log, int threads = 1);

}  // namespace twinbeam
