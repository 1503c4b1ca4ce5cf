// Closed-form predictions for MH with matrix-splitting proposals: per-mode
// terms of the log acceptance ratio, its Gaussian-limit mean/variance,
// expected acceptance rate, expected squared jump size with certified error
// bound, and the dimension-free asymptotic limits of the named families.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "splitmcmc/gaussian.hpp"
#include "splitmcmc/linalg.hpp"
#include "splitmcmc/splitting.hpp"

namespace splitmcmc {

// Per-eigenmode scalars driving every prediction.  In the common eigenbasis
// of A and the splitting, mode i carries the target precision eigenvalue
// lambda_i^2, the proposal-target precision eigenvalue lambda-tilde_i^2, the
// iteration-matrix eigenvalue G_i, and the two mean components.
class SpectralSplittingModel {
 public:
  SpectralSplittingModel(Vector lambda2, Vector lambda2_tilde, Vector g,
                         Vector mean, Vector mean_tilde)
      : lambda2_(std::move(lambda2)),
        lambda2_tilde_(std::move(lambda2_tilde)),
        g_(std::move(g)),
        mean_(std::move(mean)),
        mean_tilde_(std::move(mean_tilde)) {
    const Index d = lambda2_.size();
    if (lambda2_tilde_.size() != d || g_.size() != d || mean_.size() != d ||
        mean_tilde_.size() != d) {
      throw DimensionMismatch("model vectors must share one length");
    }
    if ((lambda2_.array() <= 0.0).any()) {
      throw NotPositiveDefinite("target precision eigenvalues must be > 0");
    }
  }

  Index dim() const { return lambda2_.size(); }
  const Vector& lambda2() const { return lambda2_; }
  const Vector& lambda2_tilde() const { return lambda2_tilde_; }
  const Vector& iteration_eigenvalues() const { return g_; }
  const Vector& mean() const { return mean_; }
  const Vector& mean_tilde() const { return mean_tilde_; }

  // Derived per-mode quantities, recomputed on demand.
  double g_tilde(Index i) const { return 1.0 - g_[i]; }          // 1 - G
  double g_sq(Index i) const { return 1.0 - g_[i] * g_[i]; }     // 1 - G^2
  double r(Index i) const {
    return (lambda2_[i] - lambda2_tilde_[i]) / lambda2_[i];
  }
  double r_tilde(Index i) const {
    return (lambda2_[i] - lambda2_tilde_[i]) / lambda2_tilde_[i];
  }
  double r_hat(Index i) const { return mean_[i] - mean_tilde_[i]; }

 private:
  Vector lambda2_;
  Vector lambda2_tilde_;
  Vector g_;
  Vector mean_;
  Vector mean_tilde_;
};

// The six per-mode coefficients of
//   Z_i = T0 + T1 xi + T2 nu + T3 xi^2 + T4 nu^2 + T5 xi nu
// for independent standard normals (xi, nu).
struct ModeTerms {
  double t0 = 0, t1 = 0, t2 = 0, t3 = 0, t4 = 0, t5 = 0;

  double mu() const { return t0 + t3 + t4; }
  double sigma2() const {
    return t1 * t1 + t2 * t2 + 2.0 * t3 * t3 + 2.0 * t4 * t4 + t5 * t5;
  }
  double term(int j) const {
    switch (j) {
      case 0: return t0;
      case 1: return t1;
      case 2: return t2;
      case 3: return t3;
      case 4: return t4;
      case 5: return t5;
    }
    throw DimensionMismatch("term index out of range");
  }
};

inline ModeTerms t_terms(const SpectralSplittingModel& m, Index i) {
  if (i < 0 || i >= m.dim()) throw DimensionMismatch("mode index");
  const double lambda2 = m.lambda2()[i];
  const double lambda = std::sqrt(lambda2);
  const double g_big = m.iteration_eigenvalues()[i];
  const double gt = m.g_tilde(i);
  const double gs = m.g_sq(i);
  const double r = m.r(i);
  const double rt = m.r_tilde(i);
  const double rh = m.r_hat(i);
  if (m.lambda2_tilde()[i] <= 0.0 || 1.0 + rt < 0.0) {
    throw NegativeRadicand("proposal-target eigenvalue must be positive");
  }
  if (gs < 0.0) {
    throw NegativeRadicand("|G| > 1: 1 - G^2 negative");
  }
  const double root = std::sqrt(gs) * std::sqrt(1.0 + rt);
  ModeTerms t;
  t.t0 = rh * rh * lambda2 * (0.5 * r * gs - gt);
  t.t1 = rh * lambda * (r * gs - gt);
  t.t2 = rh * lambda * root * (1.0 - r * g_big);
  t.t3 = 0.5 * r * gs;
  t.t4 = -0.5 * r * gs * (1.0 + rt);
  t.t5 = -r * g_big * root;
  return t;
}

// E[1 ^ e^X] for X ~ N(mu, sigma^2):
//   Phi(mu/sigma) + e^{mu + sigma^2/2} Phi(-sigma - mu/sigma),
// with the second term evaluated in log space so large mu + sigma^2/2 cannot
// overflow.  sigma below the floor degenerates to min(1, e^mu).
inline double expected_alpha_gaussian(double mu, double sigma) {
  if (sigma < 0.0) throw ConfigError("sigma must be non-negative");
  if (sigma < numerics().sigma_floor) {
    return std::min(1.0, std::exp(mu));
  }
  double first = normal_cdf(mu / sigma);
  double log_second = mu + 0.5 * sigma * sigma +
                      log_normal_cdf(-sigma - mu / sigma);
  double value = first + std::exp(log_second);
  return std::min(1.0, std::max(0.0, value));
}

struct AcceptancePrediction {
  double mu = 0.0;
  double sigma2 = 0.0;
  double acceptance = 0.0;
  // Finite-d Lyapunov-condition ratios for j = 1..5 at the given delta; small
  // values support the Gaussian limit.  Reported, never enforced.
  std::array<double, 5> lyapunov{};
  double delta = 1.0;
  // Per-mode terms, retained only for small models (d <= trace cap): row i
  // holds (T0..T5) of mode i.
  Matrix per_mode;
};

inline AcceptancePrediction predict_acceptance(const SpectralSplittingModel& m,
                                               double delta = 1.0) {
  const Index d = m.dim();
  AcceptancePrediction out;
  out.delta = delta;
  KahanSum mu_sum, var_sum;
  std::array<KahanSum, 5> abs_pow, sq;
  const bool keep = d <= numerics().trace_dim_cap;
  if (keep) out.per_mode.resize(d, 6);
  // Ascending mode order with compensated accumulation keeps the mixed-sign
  // mu sum reproducible and accurate at large d.
  for (Index i = 0; i < d; ++i) {
    ModeTerms t = t_terms(m, i);
    mu_sum.add(t.mu());
    var_sum.add(t.sigma2());
    for (int j = 1; j <= 5; ++j) {
      double v = std::abs(t.term(j));
      abs_pow[j - 1].add(std::pow(v, 2.0 + delta));
      sq[j - 1].add(v * v);
    }
    if (keep) {
      out.per_mode(i, 0) = t.t0;
      out.per_mode(i, 1) = t.t1;
      out.per_mode(i, 2) = t.t2;
      out.per_mode(i, 3) = t.t3;
      out.per_mode(i, 4) = t.t4;
      out.per_mode(i, 5) = t.t5;
    }
  }
  out.mu = mu_sum.value();
  out.sigma2 = std::max(0.0, var_sum.value());
  out.acceptance = expected_alpha_gaussian(out.mu, std::sqrt(out.sigma2));
  for (int j = 0; j < 5; ++j) {
    double den = std::pow(sq[j].value(), 1.0 + 0.5 * delta);
    out.lyapunov[j] = den > 0.0 ? abs_pow[j].value() / den : 0.0;
  }
  return out;
}

// Expected squared jump size along eigenvector i:
//   E[(q_i^T (x' - x))^2] ~ U1 U2 + U3,
// U1 the free-jump second moment, U2 the leave-one-out expected acceptance,
// |U3| a certified coupling bound.
struct JumpPrediction {
  Index mode = 0;
  double u1 = 0.0;
  double u2 = 0.0;
  double u3_bound = 0.0;
  double esjd = 0.0;  // U1 * U2
  double mu_minus = 0.0;
  double sigma2_minus = 0.0;
};

inline JumpPrediction predict_jump(const SpectralSplittingModel& m, Index i) {
  const Index d = m.dim();
  if (d < 2) throw DimensionMismatch("leave-one-out needs dimension >= 2");
  if (i < 0 || i >= d) throw DimensionMismatch("mode index");

  JumpPrediction out;
  out.mode = i;
  const double lambda2 = m.lambda2()[i];
  const double lt2 = m.lambda2_tilde()[i];
  const double gt = m.g_tilde(i);
  const double gs = m.g_sq(i);
  const double rh = m.r_hat(i);
  if (lt2 <= 0.0) throw NegativeRadicand("proposal-target eigenvalue <= 0");
  if (gs < 0.0) throw NegativeRadicand("|G| > 1");

  out.u1 = gt * gt * rh * rh + gt * gt / lambda2 + gs / lt2;

  KahanSum mu_sum, var_sum;
  for (Index j = 0; j < d; ++j) {
    if (j == i) continue;
    ModeTerms t = t_terms(m, j);
    mu_sum.add(t.mu());
    var_sum.add(t.sigma2());
  }
  out.mu_minus = mu_sum.value();
  out.sigma2_minus = std::max(0.0, var_sum.value());
  out.u2 = expected_alpha_gaussian(out.mu_minus, std::sqrt(out.sigma2_minus));

  ModeTerms ti = t_terms(m, i);
  double second = ti.sigma2() + ti.mu() * ti.mu();
  double fourth = gt * gt * gt * gt * rh * rh * rh * rh +
                  3.0 * gt * gt * gt * gt / (lambda2 * lambda2) +
                  3.0 * gs * gs / (lt2 * lt2) +
                  6.0 * gt * gt * gt * gt * rh * rh / lambda2 +
                  6.0 * gt * gt * gs * rh * rh / lt2 +
                  6.0 * gt * gt * gs / (lambda2 * lt2);
  out.u3_bound = std::sqrt(second) * std::sqrt(fourth);
  out.esjd = out.u1 * out.u2;
  return out;
}

// ---------------------------------------------------------------------------
// Family models: per-mode scalars of the named proposals, valid at any d.
// ---------------------------------------------------------------------------

enum class Family { Mala, ThetaLangevin, Hmc, Ula };

struct FamilySpec {
  Family family = Family::Mala;
  double h = 0.1;
  double theta = 0.0;       // Langevin only
  std::int64_t steps = 1;   // HMC only
};

// Build the per-mode model for a family acting on a target with the given
// precision eigenvalues (eigenvalues of VA when preconditioned, in which
// case the means are eigenbasis components in the transformed coordinates).
inline SpectralSplittingModel model_from_family(
    const Eigen::Ref<const Vector>& lambda2, const FamilySpec& spec,
    std::optional<Vector> mean = std::nullopt) {
  const Index d = lambda2.size();
  Vector m = mean ? *mean : Vector::Zero(d);
  if (m.size() != d) throw DimensionMismatch("mean length");

  Vector lt2(d), g(d);
  switch (spec.family) {
    case Family::Mala:
    case Family::Ula:
    case Family::ThetaLangevin: {
      const double theta =
          (spec.family == Family::ThetaLangevin) ? spec.theta : 0.0;
      if (theta < 0.0 || theta > 1.0) throw ConfigError("theta in [0,1]");
      if (!(spec.h > 0.0)) throw ConfigError("h must be positive");
      const double rho = 0.5 * (theta - 0.5);
      for (Index i = 0; i < d; ++i) {
        double t = spec.h * lambda2[i];
        double scale = 1.0 + rho * t;
        if (scale <= 0.0) {
          throw StepTooLarge("h lambda^2 too large: proposal target indefinite");
        }
        lt2[i] = scale * lambda2[i];
        g[i] = 1.0 - (0.5 * t) / (1.0 + 0.5 * theta * t);
      }
      break;
    }
    case Family::Hmc: {
      if (!(spec.h > 0.0)) throw ConfigError("h must be positive");
      if (spec.steps < 1) throw ConfigError("HMC needs steps >= 1");
      for (Index i = 0; i < d; ++i) {
        double t = spec.h * spec.h * lambda2[i];
        if (!(t < 4.0)) throw Unstable("h^2 lambda^2 >= 4");
        double angle = -std::acos(1.0 - 0.5 * t);
        g[i] = std::cos(static_cast<double>(spec.steps) * angle);
        lt2[i] = lambda2[i] * (1.0 - 0.25 * t);
      }
      break;
    }
  }
  // These families all satisfy calA^-1 beta = A^-1 b, so the proposal-target
  // mean equals the target mean.
  return SpectralSplittingModel(lambda2, std::move(lt2), std::move(g), m, m);
}

// Extract the per-mode model from a dense target/splitting pair.  Requires M
// and N to commute with A (functions-of-A), so that one orthogonal basis
// diagonalizes everything.
inline SpectralSplittingModel model_from_dense(const GaussianTarget& target,
                                               const MatrixSplitting& s) {
  const Index d = target.dim();
  if (s.dim() != d) throw DimensionMismatch("target/splitting size");

  const SymmetricOperator& a = target.precision();
  if (!(a.is_diagonal() && s.split_m().is_diagonal() &&
        s.split_n().is_diagonal())) {
    Matrix a_d = a.to_dense();
    Matrix m_d = s.split_m().to_dense();
    Matrix n_d = s.split_n().to_dense();
    double scale_m = a_d.norm() * m_d.norm();
    double scale_n = a_d.norm() * n_d.norm();
    if ((m_d * a_d - a_d * m_d).norm() > numerics().commute_rtol * scale_m ||
        (n_d * a_d - a_d * n_d).norm() > numerics().commute_rtol * scale_n) {
      throw NotSimultaneouslyDiagonalizable(
          "M, N do not commute with A; not functions of A");
    }
  }

  SpectralDecomposition eig = spectral_decompose(a);
  Vector lambda2 = eig.eigenvalues();
  Vector mean_modes = eig.apply_qt(target.mean());

  ProposalTarget pt = proposal_target(s);
  Vector mean_tilde_modes = eig.apply_qt(pt.mean);

  Vector lt2(d), g(d);
  if (a.is_diagonal() && s.split_m().is_diagonal() &&
      s.split_n().is_diagonal()) {
    Vector cal_a = s.proposal_precision().diagonal_values();
    Vector g_diag = s.split_n().diagonal_values().cwiseQuotient(
        s.split_m().diagonal_values());
    lt2 = eig.apply_qt(cal_a);
    g = eig.apply_qt(g_diag);
  } else {
    Matrix q = eig.q_dense();
    Matrix cal_t = q.transpose() * s.proposal_precision().to_dense() * q;
    Matrix g_full = solve_square_matrix(s.split_m(), s.split_n().to_dense());
    Matrix g_t = q.transpose() * g_full * q;
    double off_a = (cal_t - Matrix(cal_t.diagonal().asDiagonal())).norm();
    double off_g = (g_t - Matrix(g_t.diagonal().asDiagonal())).norm();
    if (off_a > numerics().simdiag_offdiag_rtol *
                    std::max(1.0, cal_t.norm()) ||
        off_g > numerics().simdiag_offdiag_rtol * std::max(1.0, g_t.norm())) {
      throw NotSimultaneouslyDiagonalizable(
          "splitting not diagonal in the eigenbasis of A");
    }
    lt2 = cal_t.diagonal();
    g = g_t.diagonal();
  }
  return SpectralSplittingModel(std::move(lambda2), std::move(lt2),
                                std::move(g), std::move(mean_modes),
                                std::move(mean_tilde_modes));
}

// ---------------------------------------------------------------------------
// Dimension-free limits under the step-size scalings h = l^2 d^-r (Langevin,
// r = 1/3 + 2 kappa) and h = l d^-r (HMC, r = 1/4 + kappa).
// ---------------------------------------------------------------------------

struct LimitParams {
  double l = 1.0;
  double kappa = 0.0;
  double theta = 0.0;          // Langevin
  double integration_time = 1.0;  // HMC T'
};

struct AsymptoticLimits {
  double acceptance = 0.0;
  double step_exponent = 0.0;  // r
  // Langevin: ESJD ~ jump_coefficient * d^-r for every eigen-direction.
  // HMC: mode-1 (lambda = 1) limit, dimension-free.
  double jump_coefficient = 0.0;
};

// Finite-d tau = (1 / d^{1+6 kappa}) sum lambda_i^6.
inline double tau_finite(const Eigen::Ref<const Vector>& lambda2,
                         double kappa) {
  const Index d = lambda2.size();
  KahanSum s;
  for (Index i = 0; i < d; ++i) {
    s.add(lambda2[i] * lambda2[i] * lambda2[i]);
  }
  return s.value() / std::pow(static_cast<double>(d), 1.0 + 6.0 * kappa);
}

// HMC jump limit for a mode with eigenvalue lambda (lambda_i = i^kappa):
//   4 (1 - cos(lambda T')) / lambda^2 * Phi(-l^2 / (8 sqrt(2(1+4 kappa)))).
inline double hmc_jump_limit(double lambda, double t_prime,
                             double acceptance_limit) {
  return 4.0 * (1.0 - std::cos(lambda * t_prime)) / (lambda * lambda) *
         0.5 * acceptance_limit;
}

inline AsymptoticLimits asymptotic_limits(Family family,
                                          const LimitParams& p,
                                          double tau = 1.0) {
  AsymptoticLimits out;
  switch (family) {
    case Family::Mala:
    case Family::Ula:
    case Family::ThetaLangevin: {
      double theta = (family == Family::ThetaLangevin) ? p.theta : 0.0;
      out.step_exponent = 1.0 / 3.0 + 2.0 * p.kappa;
      double arg =
          -std::pow(p.l, 3) * std::abs(theta - 0.5) * std::sqrt(tau) / 4.0;
      out.acceptance = std::min(1.0, 2.0 * normal_cdf(arg));
      // ESJD limit is step size times acceptance: l^2 d^-r * E[alpha].
      out.jump_coefficient = p.l * p.l * out.acceptance;
      break;
    }
    case Family::Hmc: {
      out.step_exponent = 0.25 + p.kappa;
      double arg = -p.l * p.l /
                   (8.0 * std::sqrt(2.0) * std::sqrt(1.0 + 4.0 * p.kappa));
      out.acceptance = 2.0 * normal_cdf(arg);
      out.jump_coefficient =
          hmc_jump_limit(1.0, p.integration_time, out.acceptance);
      break;
    }
  }
  return out;
}

}  // namespace splitmcmc
