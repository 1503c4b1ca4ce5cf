// Error types shared across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace splitmcmc {

// Base class for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// An operator that must be SPD has a pivot at or below the rejection
// threshold (d * eps * max diagonal).
struct NotPositiveDefinite : Error {
  using Error::Error;
};

// An iterative scheme (eigensolver, power iteration, Lyapunov fixed point)
// hit its iteration cap.
struct ConvergenceFailure : Error {
  using Error::Error;
};

struct Singular : Error {
  using Error::Error;
};

// AR(1) process with spectral radius >= 1 - margin cannot be written as a
// convergent matrix splitting.
struct NotConvergent : Error {
  using Error::Error;
};

// G * Sigma is not symmetric: the symmetric splitting construction does not
// apply and the general path must be used.
struct NotSymmetrizable : Error {
  using Error::Error;
};

struct StepTooLarge : Error {
  using Error::Error;
};

// Leapfrog stability bound h^2 * lambda_max violated.
struct Unstable : Error {
  using Error::Error;
};

// Quadratic acceptance path requested for a non-symmetric splitting.
struct NotSymmetricSplitting : Error {
  using Error::Error;
};

// A square root in the per-mode T-terms has a negative argument; the
// proposal-target precision eigenvalue is invalid.
struct NegativeRadicand : Error {
  using Error::Error;
};

// M, N do not commute with A: no common eigenbasis, spectral predictions
// would be meaningless.
struct NotSimultaneouslyDiagonalizable : Error {
  using Error::Error;
};

// A user-supplied log density returned a non-finite value or threw.
struct EvaluationFailure : Error {
  using Error::Error;
};

struct UnknownDirection : Error {
  using Error::Error;
};

struct TraceTooShort : Error {
  using Error::Error;
};

// Autocovariance at lag 0 is numerically zero (e.g. constant trace).
struct DegenerateTrace : Error {
  using Error::Error;
};

// Malformed configuration file or CLI arguments.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace splitmcmc
