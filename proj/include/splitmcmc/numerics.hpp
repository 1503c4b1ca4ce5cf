// Central tolerance record and small numeric helpers (compensated summation,
// stable log of the normal CDF).

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>

namespace splitmcmc {

// All tolerances and caps in one place.  Defaults are the library contract;
// tests and callers may override via the mutable singleton.
struct Numerics {
  // SymmetricOperator construction: dense input is symmetrized to (X+X^T)/2
  // and rejected if the correction exceeds sym_reject_tol.
  double sym_reject_tol = 1e-8;
  // Reconstruction / residual contracts.
  double chol_recon_rtol = 1e-10;
  double eig_recon_rtol = 1e-9;
  double orthogonality_tol = 1e-10;
  double solve_residual_rtol = 1e-9;
  // spectral_radius power iteration.
  double spectral_radius_tol = 1e-10;
  std::int64_t spectral_radius_max_iter = 100000;
  // AR(1) -> splitting conversion.
  double convergent_radius_margin = 1e-12;  // reject rho >= 1 - margin
  double lyapunov_fixed_point_rtol = 1e-14;
  std::int64_t lyapunov_max_iter = 1000000;
  double gsigma_symmetry_rtol = 1e-10;  // G*Sigma symmetry for the symmetric path
  // Spectral model extraction.
  double commute_rtol = 1e-8;        // functions-of-A check
  double simdiag_offdiag_rtol = 1e-8;
  // Misc.
  double mean_residual_rtol = 1e-9;  // A * mean = b consistency
  double sigma_floor = 1e-12;        // degenerate branch of E[1 ^ e^X]
  double hmc_resonance_singular = 1e-12;  // |sin(L theta)| at/below -> Singular
  double hmc_resonance_warning = 1e-6;    // below -> ill-conditioning warning
  // Dense representations are refused above this dimension; only diagonal
  // layouts scale beyond it.
  Eigen::Index dense_cap = 4096;
  // spectral_radius uses a dense eigensolver up to this size, power iteration
  // above it.
  Eigen::Index power_iteration_threshold = 4096;
  // Full x-traces, full covariance accumulation, and per-mode term retention
  // are limited to this dimension.
  Eigen::Index trace_dim_cap = 64;
};

inline Numerics& numerics() {
  static Numerics instance;
  return instance;
}

// Kahan-Babuska compensated accumulator.  Mode sums mix signs over up to 1e6
// terms; plain summation loses digits the acceptance predictions need.
class KahanSum {
 public:
  void add(double value) {
    double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Standard normal CDF.
inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// log Phi(z), stable for large negative z where erfc underflows.  Uses the
// asymptotic series Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6) for
// z << 0.
inline double log_normal_cdf(double z) {
  if (z > -10.0) {
    double p = normal_cdf(z);
    if (p > 0.0) return std::log(p);
  }
  double z2 = z * z;
  double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * M_PI) +
         std::log(series);
}

// Inverse standard normal CDF via bisection; used for inverting acceptance
// limits.  Accuracy ~1e-12, plenty for tuning constants.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace splitmcmc
