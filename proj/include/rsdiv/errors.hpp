/**
 * @file errors.hpp
 * @brief Error taxonomy for the library.
 *
 * Two top-level families mirror the CLI exit codes: configuration errors
 * (bad parameters, malformed input files -> exit 2) and numerical failures
 * (solver breakdown, divergence -> exit 3).  More specific conditions derive
 * from these so call sites can catch exactly what they can handle.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace rsdiv {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, parameter set, or input file (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Numerical failure during a solve, estimation, or training run
/// (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The exponent-rate quadratic has no admissible positive root.
/// Carries the discriminant observed at the failure point.
class NoPositiveRoot : public NumericalError {
 public:
  explicit NoPositiveRoot(double disc)
      : NumericalError("exponent-rate quadratic has no positive root "
                       "(discriminant = " +
                       std::to_string(disc) + ")"),
        discriminant(disc) {}

  double discriminant;  ///< b^2 - 4ac at the failure point
};

/// Outer fixed-point iteration exhausted its iteration budget.
/// Carries the last endpoint residuals.
class FixedPointDiverged : public NumericalError {
 public:
  FixedPointDiverged(double r0_, double r1_)
      : NumericalError("endpoint-split fixed point did not converge "
                       "(residuals " +
                       std::to_string(r0_) + ", " + std::to_string(r1_) + ")"),
        r0(r0_),
        r1(r1_) {}

  double r0;  ///< last residual at the p=0 endpoint
  double r1;  ///< last residual at the p=1 endpoint
};

/// A regime received no labelled observations during estimation.
class EstimationDegenerate : public NumericalError {
 public:
  using NumericalError::NumericalError;
  EstimationDegenerate(const std::string& msg, double mu1, bool has1,
                       double mu2, bool has2)
      : NumericalError(msg),
        mu1_partial(mu1),
        mu2_partial(mu2),
        has_mu1(has1),
        has_mu2(has2) {}

  double mu1_partial = 0.0;  ///< drift of regime 1 if it had labels
  double mu2_partial = 0.0;  ///< drift of regime 2 if it had labels
  bool has_mu1 = false;
  bool has_mu2 = false;
};

/// Episode generation failed (e.g. the exponent rates are not computable
/// at the current parameters); the training loop skips the update.
class EpisodeAborted : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Training failed outright (e.g. a long run of consecutive aborts).
class TrainingFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Evaluation produced a degenerate report (e.g. every path ruined at
/// the first step).
class DegenerateReport : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace rsdiv
