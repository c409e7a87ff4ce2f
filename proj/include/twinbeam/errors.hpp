#pragma once

#include <stdexcept>
#include <string>

namespace twinbeam {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A configuration or argument value outside its documented domain.
struct InvalidParameterError : Error {
  using Error::Error;
};

/// Estimator denominator is zero or negative (e.g. N_s <= N_bn).
struct DegenerateDenominatorError : Error {
  using Error::Error;
};

/// A run contains no usable signal (sum of counts is zero).
struct NoSignalError : Error {
  using Error::Error;
};

/// The dead-time quadratic has no root in (0, 1].
struct NoPhysicalSolutionError : Error {
  using Error::Error;
};

/// The dead-time quadratic has a negative discriminant, or every
/// bootstrap replicate failed: the measurement is self-inconsistent.
struct InconsistentMeasurementError : Error {
  using Error::Error;
};

/// Both quadratic roots lie in (0, 1]; refusing to guess.
struct AmbiguousRootError : Error {
  using Error::Error;
};

/// Background subtraction drove a denominator to zero or below.
struct OverSubtractionError : Error {
  using Error::Error;
};

/// Too few pulses or blocks for the requested statistic.
struct InsufficientDataError : Error {
  using Error::Error;
};

/// Exact enumeration would exceed the guarded problem size.
struct BudgetExceededError : Error {
  using Error::Error;
};

/// Scenario file is malformed or violates its invariants.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace twinbeam
