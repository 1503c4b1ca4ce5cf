// Matrix splittings and their equivalence with AR(1) processes.
//
// An AR(1) proposal  y = G x + g + nu,  nu ~ N(0, Sigma)  with spectral
// radius(G) < 1 is equivalent to the splitting form  M y = N x + beta + nu,
// nu ~ N(0, M^T + N), where calA = M - N is the precision of the proposal
// target distribution N(calA^-1 beta, calA^-1).

#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "splitmcmc/gaussian.hpp"
#include "splitmcmc/linalg.hpp"
#include "splitmcmc/random.hpp"

namespace splitmcmc {

// Sampling-ready AR(1) form (G, g, Sigma) with a cached noise factor.
class Ar1Proposal {
 public:
  Ar1Proposal(SquareOperator g_matrix, Vector shift, SymmetricOperator sigma)
      : g_(std::move(g_matrix)),
        shift_(std::move(shift)),
        sigma_(std::move(sigma)),
        noise_factor_(spd_factorize(sigma_)) {
    if (g_.dim() != shift_.size() || g_.dim() != sigma_.dim()) {
      throw DimensionMismatch("AR(1) proposal dimensions inconsistent");
    }
  }

  Index dim() const { return g_.dim(); }
  const SquareOperator& iteration_matrix() const { return g_; }
  const Vector& shift() const { return shift_; }
  const SymmetricOperator& noise_covariance() const { return sigma_; }
  const SpdFactorization& noise_factor() const { return noise_factor_; }

  Vector mean_given(const Eigen::Ref<const Vector>& x) const {
    return g_.apply(x) + shift_;
  }

  // y = G x + g + Sigma^{1/2} xi
  Vector propose(const Eigen::Ref<const Vector>& x, RandomStream& rng) const {
    Vector xi = rng.normal_vector(dim());
    return mean_given(x) + noise_factor_.apply_factor(xi);
  }

  // log N(to; G from + g, Sigma) up to the constant (shared) normalizer.
  double log_transition_unnorm(const Eigen::Ref<const Vector>& from,
                               const Eigen::Ref<const Vector>& to) const {
    Vector r = to - mean_given(from);
    return noise_factor_.half_negative_mahalanobis(r);
  }

 private:
  SquareOperator g_;
  Vector shift_;
  SymmetricOperator sigma_;
  SpdFactorization noise_factor_;
};

// Proposal target distribution N(calA^-1 beta, calA^-1) of a convergent
// splitting.
struct ProposalTarget {
  Vector mean;
  SymmetricOperator precision;
};

// Splitting (M, N, beta) with derived calA = M - N and noise covariance
// M^T + N.  calA is SPD whenever the splitting is convergent; non-convergent
// splittings are constructible (e.g. an over-stepped Langevin proposal) but
// refuse the convergence-dependent operations.
class MatrixSplitting {
 public:
  MatrixSplitting(SquareOperator m, SquareOperator n, Vector beta)
      : MatrixSplitting(std::move(m), std::move(n), std::move(beta),
                        std::nullopt) {}

  // Family constructors pass a closed-form spectral radius to skip the
  // general eigensolve.
  static MatrixSplitting with_known_radius(SquareOperator m, SquareOperator n,
                                           Vector beta, double radius) {
    return MatrixSplitting(std::move(m), std::move(n), std::move(beta),
                           radius);
  }

  Index dim() const { return m_.dim(); }
  const SquareOperator& split_m() const { return m_; }
  const SquareOperator& split_n() const { return n_; }
  const Vector& beta() const { return beta_; }

  // calA = M - N, the proposal-target precision.
  const SymmetricOperator& proposal_precision() const { return cal_a_; }

  // M^T + N, the splitting-form noise covariance.
  const SymmetricOperator& noise_covariance() const { return noise_cov_; }
  SpdFactorization noise_factor() const { return spd_factorize(noise_cov_); }

  double spectral_radius() const { return radius_; }
  bool convergent() const {
    return radius_ < 1.0 - numerics().convergent_radius_margin;
  }
  bool symmetric() const { return symmetric_; }

 private:
  MatrixSplitting(SquareOperator m, SquareOperator n, Vector beta,
                  std::optional<double> known_radius)
      : m_(std::move(m)),
        n_(std::move(n)),
        beta_(std::move(beta)),
        cal_a_(derive_cal_a(m_, n_)),
        noise_cov_(derive_noise(m_, n_)) {
    if (m_.dim() != n_.dim() || m_.dim() != beta_.size()) {
      throw DimensionMismatch("splitting dimensions inconsistent");
    }
    symmetric_ =
        m_.is_symmetric(numerics().gsigma_symmetry_rtol) &&
        n_.is_symmetric(numerics().gsigma_symmetry_rtol);
    if (known_radius) {
      radius_ = *known_radius;
    } else {
      SquareOperator g = m_.is_diagonal() && n_.is_diagonal()
                             ? SquareOperator::from_diagonal(
                                   n_.diagonal_values().cwiseQuotient(
                                       m_.diagonal_values()))
                             : SquareOperator::from_dense(
                                   solve_square_matrix(m_, n_.to_dense()));
      radius_ = ::splitmcmc::spectral_radius(g);
    }
  }

  static SymmetricOperator derive_cal_a(const SquareOperator& m,
                                        const SquareOperator& n) {
    SquareOperator diff = subtract(m, n);
    if (!diff.is_symmetric(numerics().gsigma_symmetry_rtol)) {
      throw DimensionMismatch("M - N is not symmetric");
    }
    return SymmetricOperator::from_square(diff);
  }

  static SymmetricOperator derive_noise(const SquareOperator& m,
                                        const SquareOperator& n) {
    SquareOperator s = add(m.transpose(), n);
    if (!s.is_symmetric(numerics().gsigma_symmetry_rtol)) {
      throw DimensionMismatch("M^T + N is not symmetric");
    }
    return SymmetricOperator::from_square(s);
  }

  SquareOperator m_;
  SquareOperator n_;
  Vector beta_;
  SymmetricOperator cal_a_;
  SymmetricOperator noise_cov_;
  bool symmetric_ = false;
  double radius_ = 0.0;
};

namespace detail {

// Fixed point of C = Sigma + G C G^T, i.e. the AR(1) stationary covariance
// sum_l G^l Sigma (G^T)^l.  Diagonal inputs have the closed form
// sigma / (1 - g^2).
inline SymmetricOperator stationary_covariance(const SquareOperator& g,
                                               const SymmetricOperator& sigma) {
  if (g.is_diagonal() && sigma.is_diagonal()) {
    Vector denom =
        (1.0 - g.diagonal_values().array().square()).matrix();
    return SymmetricOperator::from_diagonal(
        sigma.diagonal_values().cwiseQuotient(denom));
  }
  Matrix gd = g.to_dense();
  Matrix c = sigma.to_dense();
  const double rtol = numerics().lyapunov_fixed_point_rtol;
  const std::int64_t cap = numerics().lyapunov_max_iter;
  for (std::int64_t k = 0; k < cap; ++k) {
    Matrix next = sigma.to_dense() + gd * c * gd.transpose();
    double delta = (next - c).norm();
    double scale = c.norm();
    c = std::move(next);
    if (delta <= rtol * scale) {
      return SymmetricOperator::from_dense(0.5 * (c + c.transpose()));
    }
  }
  throw ConvergenceFailure("stationary covariance fixed point hit cap");
}

}  // namespace detail

// General conversion:  calA = (sum_l G^l Sigma (G^T)^l)^-1,
// M = calA (I - G)^-1,  N = M G,  beta = M g.
inline MatrixSplitting ar1_to_splitting(const Ar1Proposal& p) {
  double rho = spectral_radius(p.iteration_matrix());
  if (rho >= 1.0 - numerics().convergent_radius_margin) {
    throw NotConvergent("AR(1) spectral radius too close to 1");
  }
  const SquareOperator& g = p.iteration_matrix();
  SymmetricOperator cov = detail::stationary_covariance(g, p.noise_covariance());

  if (g.is_diagonal() && cov.is_diagonal()) {
    Vector cal_a = cov.diagonal_values().cwiseInverse();
    if ((cal_a.array() <= 0.0).any()) {
      throw NotPositiveDefinite("stationary covariance not positive");
    }
    Vector one_minus_g = (1.0 - g.diagonal_values().array()).matrix();
    Vector m = cal_a.cwiseQuotient(one_minus_g);
    Vector n = m.cwiseProduct(g.diagonal_values());
    Vector beta = m.cwiseProduct(p.shift());
    return MatrixSplitting::with_known_radius(
        SquareOperator::from_diagonal(m), SquareOperator::from_diagonal(n),
        std::move(beta), rho);
  }

  // calA = cov^-1 through its Cholesky factor; rejects indefiniteness from a
  // numerically marginal G instead of repairing it.
  SpdFactorization cov_factor = spd_factorize(cov);
  Index d = p.dim();
  Matrix cal_a = cov_factor.solve_matrix(Matrix::Identity(d, d));
  cal_a = 0.5 * (cal_a + cal_a.transpose());
  // M^T = (I - G)^-T calA
  Matrix i_minus_g_t = Matrix::Identity(d, d) - g.to_dense().transpose();
  Eigen::FullPivLU<Matrix> lu(i_minus_g_t);
  if (!lu.isInvertible()) throw Singular("I - G singular");
  Matrix m = lu.solve(cal_a).transpose();
  Matrix n = m * g.to_dense();
  Vector beta = m * p.shift();
  return MatrixSplitting::with_known_radius(
      SquareOperator::from_dense(std::move(m)),
      SquareOperator::from_dense(std::move(n)), std::move(beta), rho);
}

// Symmetric special case, valid when G Sigma is symmetric:
// M = Sigma^-1 (I + G),  calA = Sigma^-1 (I - G^2),  N = M G,  beta = M g.
inline MatrixSplitting symmetric_ar1_to_splitting(const Ar1Proposal& p) {
  double rho = spectral_radius(p.iteration_matrix());
  if (rho >= 1.0 - numerics().convergent_radius_margin) {
    throw NotConvergent("AR(1) spectral radius too close to 1");
  }
  const SquareOperator& g = p.iteration_matrix();
  SquareOperator g_sigma = compose(g, p.noise_covariance().as_square());
  if (!g_sigma.is_symmetric(numerics().gsigma_symmetry_rtol)) {
    throw NotSymmetrizable("G * Sigma is not symmetric; use the general path");
  }

  if (g.is_diagonal() && p.noise_covariance().is_diagonal()) {
    const Vector& gv = g.diagonal_values();
    const Vector& sv = p.noise_covariance().diagonal_values();
    Vector m = (1.0 + gv.array()).matrix().cwiseQuotient(sv);
    Vector n = m.cwiseProduct(gv);
    Vector beta = m.cwiseProduct(p.shift());
    return MatrixSplitting::with_known_radius(
        SquareOperator::from_diagonal(m), SquareOperator::from_diagonal(n),
        std::move(beta), rho);
  }

  Index d = p.dim();
  Matrix gd = g.to_dense();
  Matrix m = p.noise_factor().solve_matrix(Matrix::Identity(d, d) + gd);
  m = 0.5 * (m + m.transpose());
  Matrix n = m * gd;
  n = 0.5 * (n + n.transpose());
  Vector beta = m * p.shift();
  return MatrixSplitting::with_known_radius(
      SquareOperator::from_dense(std::move(m)),
      SquareOperator::from_dense(std::move(n)), std::move(beta), rho);
}

// G = M^-1 N,  g = M^-1 beta,  Sigma = M^-1 (M^T + N) M^-T.
inline Ar1Proposal splitting_to_ar1(const MatrixSplitting& s) {
  const SquareOperator& m = s.split_m();
  const SquareOperator& n = s.split_n();
  if (m.is_diagonal() && n.is_diagonal()) {
    const Vector& mv = m.diagonal_values();
    double floor = mv.cwiseAbs().maxCoeff() *
                   std::numeric_limits<double>::epsilon() * m.dim();
    if ((mv.cwiseAbs().array() <= floor).any()) {
      throw Singular("M has a zero diagonal entry");
    }
    Vector g = n.diagonal_values().cwiseQuotient(mv);
    Vector shift = s.beta().cwiseQuotient(mv);
    Vector sigma = s.noise_covariance().diagonal_values().cwiseQuotient(
        mv.cwiseProduct(mv));
    return Ar1Proposal(SquareOperator::from_diagonal(std::move(g)),
                       std::move(shift),
                       SymmetricOperator::from_diagonal(std::move(sigma)));
  }
  Matrix md = m.to_dense();
  Eigen::FullPivLU<Matrix> lu(md);
  if (!lu.isInvertible()) throw Singular("M is singular");
  Matrix g = lu.solve(n.to_dense());
  Vector shift = lu.solve(s.beta());
  Matrix half = lu.solve(s.noise_covariance().to_dense());  // M^-1 (M^T+N)
  Matrix sigma = lu.solve(half.transpose()).transpose();    // ... M^-T
  sigma = 0.5 * (sigma + sigma.transpose());
  return Ar1Proposal(SquareOperator::from_dense(std::move(g)),
                     std::move(shift),
                     SymmetricOperator::from_dense(std::move(sigma)));
}

inline ProposalTarget proposal_target(const MatrixSplitting& s) {
  if (!s.convergent()) {
    throw NotConvergent("proposal target undefined for a divergent splitting");
  }
  SpdFactorization f = spd_factorize(s.proposal_precision());
  return ProposalTarget{f.solve(s.beta()), s.proposal_precision()};
}

// Bundle returned by the proposal family constructors.
struct ProposalPair {
  Ar1Proposal proposal;
  MatrixSplitting splitting;
};

}  // namespace splitmcmc
