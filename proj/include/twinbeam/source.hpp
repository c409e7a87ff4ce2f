#pragma once

#include <cmath>

#include "twinbeam/rng.hpp"

namespace twinbeam {

enum class SourceKind {
  twin_thermal,  ///< multimode thermal twin beams with conjugate-matched modes
  coherent,      ///< independent Poissonian light in each arm (shot-noise reference)
  dark_only      ///< no light; background/dark characterization runs
};

/// Twin-beam source parameters.
struct SourceConfig {
  int modes = 100;               ///< detected modes per arm, M >= 1
  double mean_per_mode = 1e-3;   ///< mean photons per mode per pulse, mu >= 0
  double overlap = 1.0;          ///< fraction of signal modes with detected conjugates, f in [0,1]
  SourceKind kind = SourceKind::twin_thermal;

  /// Matched conjugate pairs: f*M rounded to the nearest integer (modes are
  /// discrete; ties round away from zero).
  int matched_modes() const { return static_cast<int>(std::lround(overlap * modes)); }

  void validate() const;  // throws InvalidParameterError
};

/// Pre-detection photon numbers of one pulse.
struct PhotonPair {
  int n_s = 0;
  int n_i = 0;
};

/// Draws one pulse. twin_thermal: the matched-mode group contributes one
/// shared multimode-thermal count to both arms (photon numbers identical by
/// construction), the unmatched groups contribute independent thermal counts
/// at the same mu. coherent: independent Poisson(M*mu) per arm. dark_only:
/// (0, 0). Assumes a validated config.
PhotonPair sample_pulse(const SourceConfig& config, RngStream& rng);

/// Fraction of detected signal modes whose conjugate idler modes fall inside
/// the idler aperture, from the two-dimensional angular-acceptance area
/// ratio: f = min(1, ((d_i*lambda_s)/(d_s*lambda_i))^2). Conjugate transverse
/// angles scale with wavelength and acceptance with aperture diameter, so
/// f = 1 exactly once d_i/d_s >= lambda_i/lambda_s.
/// Diameters in mm, wavelengths in nm; all arguments must be positive.
double aperture_overlap(double d_s, double d_i, double lambda_s, double lambda_i);

}  // namespace twinbeam
