// Empirical estimators closing the loop against theory: directional expected
// squared jump size, lag-1 autocorrelation, Geyer-truncated integrated
// autocorrelation time, and moment checks against the target.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include "splitmcmc/gaussian.hpp"
#include "splitmcmc/sampler.hpp"

namespace splitmcmc {

struct EsjdEstimate {
  std::string label;
  double mean_sq_jump = 0.0;
  // Standard error of the squared-jump mean, ignoring autocorrelation of the
  // squared jumps (documented caveat: no variance formula is available for
  // the estimator, so comparisons use 3 SE with this approximation).
  double se = 0.0;
  std::int64_t n = 0;
};

struct IactEstimate {
  std::string label;
  double iact = 0.0;   // raw Geyer estimate; may dip below 1 for iid chains
  double lag1 = 0.0;
  std::int64_t truncation_lag = 0;

  // Value clamped to the reversible-chain lower bound, for reports.
  double reported() const { return std::max(1.0, iact); }
};

namespace detail {

inline const DirectionStats& find_direction(const ChainResult& res,
                                            const Eigen::Ref<const Vector>& w) {
  for (const DirectionStats& ds : res.directions) {
    if (ds.direction.size() == w.size() &&
        (ds.direction - w).norm() <= 1e-12 * std::max(1.0, w.norm())) {
      return ds;
    }
  }
  throw UnknownDirection("direction was not registered before the run");
}

}  // namespace detail

inline EsjdEstimate esjd(const DirectionStats& ds) {
  EsjdEstimate out;
  out.label = ds.label;
  out.n = ds.n_jumps;
  if (ds.n_jumps == 0) return out;
  double n = static_cast<double>(ds.n_jumps);
  out.mean_sq_jump = ds.sum_jump_sq / n;
  if (ds.n_jumps > 1) {
    double var =
        (ds.sum_jump_quad / n - out.mean_sq_jump * out.mean_sq_jump) * n /
        (n - 1.0);
    out.se = std::sqrt(std::max(0.0, var) / n);
  }
  return out;
}

inline EsjdEstimate esjd(const ChainResult& res,
                         const Eigen::Ref<const Vector>& w) {
  return esjd(detail::find_direction(res, w));
}

inline EsjdEstimate esjd(const ChainResult& res, std::size_t index) {
  if (index >= res.directions.size()) {
    throw UnknownDirection("direction index out of range");
  }
  return esjd(res.directions[index]);
}

namespace detail {

// A projected trace whose centered sum of squares is this far below its raw
// mean square is numerically constant (pure summation roundoff).
inline constexpr double kDegenerateRel = 1e-12;

inline double raw_mean_square(std::span<const double> s) {
  double msq = 0.0;
  for (double v : s) msq += v * v;
  return s.empty() ? 0.0 : msq / static_cast<double>(s.size());
}

inline double projected_mean(const DirectionStats& ds) {
  if (ds.projected.empty()) return 0.0;
  double s = 0.0;
  for (double v : ds.projected) s += v;
  return s / static_cast<double>(ds.projected.size());
}

inline double projected_variance(const DirectionStats& ds, double mean) {
  if (ds.projected.size() < 2) return 0.0;
  double s = 0.0;
  for (double v : ds.projected) s += (v - mean) * (v - mean);
  return s / static_cast<double>(ds.projected.size() - 1);
}

}  // namespace detail

// Direct lag-1 autocorrelation of the projected chain.  A chain that never
// moved has perfect correlation.
inline double lag1_correlation(const DirectionStats& ds) {
  const std::vector<double>& s = ds.projected;
  if (s.size() < 2) return 0.0;
  double mean = detail::projected_mean(ds);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    num += (s[k] - mean) * (s[k + 1] - mean);
  }
  for (double v : s) den += (v - mean) * (v - mean);
  double floor = detail::kDegenerateRel * detail::raw_mean_square(s) *
                 static_cast<double>(s.size());
  if (den <= floor) return 1.0;
  return num / den;
}

inline double lag1_correlation(const ChainResult& res,
                               const Eigen::Ref<const Vector>& w) {
  return lag1_correlation(detail::find_direction(res, w));
}

// Identity-based value 1 - ESJD / (2 Var); agrees with the direct estimator
// up to Monte Carlo error.
inline double lag1_identity(const DirectionStats& ds) {
  double mean = detail::projected_mean(ds);
  double var = detail::projected_variance(ds, mean);
  if (var <= detail::kDegenerateRel *
                 detail::raw_mean_square(std::span<const double>(ds.projected))) {
    return 1.0;
  }
  return 1.0 - esjd(ds).mean_sq_jump / (2.0 * var);
}

inline double lag1_identity(const ChainResult& res,
                            const Eigen::Ref<const Vector>& w) {
  return lag1_identity(detail::find_direction(res, w));
}

// Geyer initial-positive-sequence IACT: sum adjacent autocovariance pairs
// while they stay positive.
inline IactEstimate iact(std::span<const double> trace,
                         const std::string& label = "") {
  IactEstimate out;
  out.label = label;
  const std::size_t n = trace.size();
  if (n < 100) throw TraceTooShort("IACT needs at least 100 samples");

  double mean = 0.0;
  for (double v : trace) mean += v;
  mean /= static_cast<double>(n);

  auto gamma = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) {
      s += (trace[t] - mean) * (trace[t + lag] - mean);
    }
    return s / static_cast<double>(n);
  };

  double g0 = gamma(0);
  if (!(g0 > detail::kDegenerateRel * detail::raw_mean_square(trace))) {
    throw DegenerateTrace("zero variance trace");
  }
  double g1 = gamma(1);
  out.lag1 = g1 / g0;

  double total = 0.0;
  std::size_t m = 0;
  for (;; ++m) {
    std::size_t lag_even = 2 * m;
    std::size_t lag_odd = 2 * m + 1;
    if (lag_odd >= n / 2) break;
    double pair = gamma(lag_even) + gamma(lag_odd);
    if (pair <= 0.0) break;
    total += pair;
    out.truncation_lag = static_cast<std::int64_t>(lag_odd);
  }
  out.iact = -1.0 + 2.0 * total / g0;
  return out;
}

inline IactEstimate iact(const DirectionStats& ds) {
  return iact(std::span<const double>(ds.projected), ds.label);
}

inline IactEstimate iact(const ChainResult& res,
                         const Eigen::Ref<const Vector>& w) {
  return iact(detail::find_direction(res, w));
}

// Moment check of a chain (or sample stream) against its nominal target.
struct MomentReport {
  Vector mean_z;        // per-coordinate z-scores of the empirical mean
  Vector variance_ratio;  // empirical variance / diag(A^-1)
  double max_abs_z = 0.0;
  double max_variance_rel_err = 0.0;
  double cov_frobenius_rel_err = -1.0;  // dense targets only, else -1
  std::int64_t n = 0;
};

inline MomentReport target_moment_check(const ChainResult& res,
                                        const GaussianTarget& target) {
  if (res.dim != target.dim()) {
    throw DimensionMismatch("result/target dimension");
  }
  MomentReport rep;
  rep.n = res.n_samples;
  Vector mean = res.empirical_mean();
  Vector var = res.empirical_variance();
  Vector cov_diag = target.covariance_diagonal();
  const Index d = target.dim();
  rep.mean_z.resize(d);
  rep.variance_ratio.resize(d);
  for (Index i = 0; i < d; ++i) {
    // SE of the mean uses the plain sample count; autocorrelation widens the
    // true error, so these z-scores are exact only for independent draws.
    double se = std::sqrt(cov_diag[i] / std::max<std::int64_t>(res.n_samples, 1));
    rep.mean_z[i] = se > 0.0 ? (mean[i] - target.mean()[i]) / se : 0.0;
    rep.variance_ratio[i] = var[i] / cov_diag[i];
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(rep.mean_z[i]));
    rep.max_variance_rel_err =
        std::max(rep.max_variance_rel_err, std::abs(rep.variance_ratio[i] - 1.0));
  }
  if (!target.precision().is_diagonal() && res.cov_sum.size() > 0) {
    Matrix emp = res.empirical_covariance();
    Matrix cov = target.covariance_dense();
    rep.cov_frobenius_rel_err = (emp - cov).norm() / cov.norm();
  }
  return rep;
}

// CSV summary, one row per registered direction:
// `direction,esjd,se,lag1,iact`.
inline void write_diagnostics_csv(std::ostream& out, const ChainResult& res) {
  out << "direction,esjd,se,lag1,iact\n";
  out << std::setprecision(17);
  for (const DirectionStats& ds : res.directions) {
    EsjdEstimate e = esjd(ds);
    double l1 = ds.projected.size() >= 2 ? lag1_correlation(ds) : 0.0;
    double tau = ds.projected.size() >= 100 ? iact(ds).iact : std::nan("");
    out << ds.label << ',' << e.mean_sq_jump << ',' << e.se << ',' << l1
        << ',' << tau << "\n";
  }
}

}  // namespace splitmcmc
