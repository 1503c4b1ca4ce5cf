// The named proposal families as AR(1) + splitting pairs: MALA/ULA,
// theta-discretized preconditioned Langevin, and leapfrog HMC with its
// transfer matrices and mode-eigenvalue formula.

#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <utility>

#include "splitmcmc/sampler.hpp"
#include "splitmcmc/splitting.hpp"

namespace splitmcmc {

// ---------------------------------------------------------------------------
// MALA:  y = (I - h/2 A) x + h/2 b + sqrt(h) xi.
// Splitting  M = (2/h)(I - h/4 A),  N = M (I - h/2 A),
//            calA = (I - h/4 A) A,  beta = (I - h/4 A) b.
// Convergent iff h * lambda_max(A) < 4.
// ---------------------------------------------------------------------------

inline ProposalPair mala(const GaussianTarget& target, double h,
                         bool require_convergent = false) {
  if (!(h > 0.0)) throw ConfigError("MALA step h must be positive");
  const Index d = target.dim();
  const SymmetricOperator& a = target.precision();
  double lmax = lambda_max(a);
  double lmin = lambda_min(a);
  bool convergent = h * lmax < 4.0;
  if (require_convergent && !convergent) {
    throw StepTooLarge("h * lambda_max(A) >= 4: MALA splitting divergent");
  }
  double rho = std::max(std::abs(1.0 - 0.5 * h * lmax),
                        std::abs(1.0 - 0.5 * h * lmin));

  SquareOperator g = identity_plus(a.as_square(), -0.5 * h);
  Vector shift = 0.5 * h * target.shift();
  SymmetricOperator sigma =
      SymmetricOperator::from_diagonal(Vector::Constant(d, h));
  Ar1Proposal proposal(g, shift, sigma);

  SquareOperator half = identity_plus(a.as_square(), -0.25 * h);  // I - h/4 A
  SquareOperator m = scaled(half, 2.0 / h);
  SquareOperator n = compose(m, g);
  Vector beta = half.apply(target.shift());
  MatrixSplitting splitting =
      MatrixSplitting::with_known_radius(m, n, std::move(beta), rho);
  return ProposalPair{std::move(proposal), std::move(splitting)};
}

// Unadjusted Langevin: the MALA AR(1) chain with no accept/reject step.  Its
// equilibrium is the proposal target N(A^-1 b, calA^-1), not the target.
inline ChainResult ula_chain(const GaussianTarget& target, double h,
                             const ChainConfig& cfg, RandomStream& rng) {
  cfg.validate();
  ProposalPair pp = mala(target, h, /*require_convergent=*/true);
  const Ar1Proposal& prop = pp.proposal;
  const Index d = target.dim();

  Vector x = detail::initial_state(target, pp.splitting, cfg, rng);

  ChainResult res;
  res.seed = rng.seed();
  res.stream = rng.stream();
  res.dim = d;
  res.n_steps = cfg.n_steps;
  res.burn_in = cfg.burn_in;
  res.mean_sum = Vector::Zero(d);
  res.diag_sq_sum = Vector::Zero(d);
  const bool track_cov = d <= numerics().trace_dim_cap;
  if (track_cov) res.cov_sum = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < cfg.esjd_directions.size(); ++k) {
    DirectionStats ds;
    ds.direction = cfg.esjd_directions[k];
    if (ds.direction.size() != d) {
      throw DimensionMismatch("ESJD direction dimension");
    }
    ds.label = "w" + std::to_string(k);
    ds.single_index = detail::detect_single_index(ds.direction);
    res.directions.push_back(std::move(ds));
  }
  std::vector<double> s_prev(res.directions.size(), 0.0);
  for (std::int64_t step = 0; step < cfg.n_steps; ++step) {
    if (step == cfg.burn_in) {
      for (std::size_t k = 0; k < res.directions.size(); ++k) {
        s_prev[k] = res.directions[k].project(x);
        res.directions[k].projected.push_back(s_prev[k]);
      }
    }
    x = prop.propose(x, rng);
    ++res.accept_count;  // every move is taken
    if (step >= cfg.burn_in) {
      ++res.n_samples;
      res.mean_sum += x;
      res.diag_sq_sum += x.cwiseProduct(x);
      if (track_cov) res.cov_sum += x * x.transpose();
      for (std::size_t k = 0; k < res.directions.size(); ++k) {
        DirectionStats& ds = res.directions[k];
        double s = ds.project(x);
        double jump = s - s_prev[k];
        double j2 = jump * jump;
        ds.sum_jump_sq += j2;
        ds.sum_jump_quad += j2 * j2;
        ds.sum_lag += s_prev[k] * s;
        ++ds.n_jumps;
        ds.projected.push_back(s);
        s_prev[k] = s;
      }
    }
  }
  return res;
}

inline ChainResult ula_chain(const GaussianTarget& target, double h,
                             std::int64_t n_steps, RandomStream& rng) {
  ChainConfig cfg;
  cfg.n_steps = n_steps;
  return ula_chain(target, h, cfg, rng);
}

// ---------------------------------------------------------------------------
// theta-discretized preconditioned Langevin.
//
//   (I + th/2 VA) y = (I - (1-t)h/2 VA) x + h/2 V b + (hV)^{1/2} xi
//
// theta = 0, V = I recovers MALA; theta = 1/2 makes the proposal target equal
// the target (Crank-Nicolson exactness).
// ---------------------------------------------------------------------------

struct LangevinConfig {
  double h = 0.1;
  double theta = 0.0;
  std::optional<SymmetricOperator> preconditioner;  // default identity

  void validate() const {
    if (!(h > 0.0)) throw ConfigError("Langevin step h must be positive");
    if (theta < 0.0 || theta > 1.0) {
      throw ConfigError("theta must lie in [0, 1]");
    }
  }
};

namespace detail {

inline SymmetricOperator effective_preconditioner(
    const std::optional<SymmetricOperator>& v, Index d) {
  if (!v) return SymmetricOperator::identity(d);
  if (v->dim() != d) throw DimensionMismatch("preconditioner dimension");
  return *v;
}

// |G| for one Langevin mode with t = h * lambda^2.
inline double langevin_mode_g(double t, double theta) {
  return 1.0 - (0.5 * t) / (1.0 + 0.5 * theta * t);
}

}  // namespace detail

inline ProposalPair theta_langevin(const GaussianTarget& target,
                                   const LangevinConfig& cfg) {
  cfg.validate();
  const Index d = target.dim();
  const double h = cfg.h;
  const double theta = cfg.theta;
  SymmetricOperator v = detail::effective_preconditioner(cfg.preconditioner, d);
  const bool all_diag = target.precision().is_diagonal() && v.is_diagonal();

  if (all_diag) {
    const Vector& av = target.precision().diagonal_values();
    const Vector& vv = v.diagonal_values();
    Vector lambda2 = vv.cwiseProduct(av);  // eigenvalues of VA
    Vector t = h * lambda2;
    Vector denom = (1.0 + 0.5 * theta * t.array()).matrix();
    if ((denom.array().abs() <= 0.0).any()) {
      throw Singular("I + (theta h/2) VA is singular");
    }
    Vector g = (1.0 - (0.5 * t.array()) / denom.array()).matrix();
    Vector shift =
        (0.5 * h) * vv.cwiseProduct(target.shift()).cwiseQuotient(denom);
    Vector sigma = h * vv.cwiseQuotient(denom.cwiseProduct(denom));
    Ar1Proposal proposal(SquareOperator::from_diagonal(g), shift,
                         SymmetricOperator::from_diagonal(sigma));

    // Splitting per the closed form; diagonal so V^{+-1/2} are elementwise.
    double rho_coef = 0.5 * (theta - 0.5);  // (theta - 1/2)/2 * h premultiplied below
    Vector w = (1.0 + rho_coef * h * lambda2.array()).matrix();
    Vector m = (2.0 / h) * w.cwiseProduct(denom).cwiseQuotient(vv);
    Vector n = m.cwiseProduct(g);
    Vector beta = w.cwiseProduct(target.shift());
    double rho = std::max(
        std::abs(detail::langevin_mode_g(h * lambda2.maxCoeff(), theta)),
        std::abs(detail::langevin_mode_g(h * lambda2.minCoeff(), theta)));
    MatrixSplitting splitting = MatrixSplitting::with_known_radius(
        SquareOperator::from_diagonal(m), SquareOperator::from_diagonal(n),
        std::move(beta), rho);
    return ProposalPair{std::move(proposal), std::move(splitting)};
  }

  Matrix a_d = target.precision().to_dense();
  Matrix v_d = v.to_dense();
  SpectralDecomposition v_eig = spectral_decompose(v);
  if (v_eig.eigenvalues().minCoeff() <= 0.0) {
    throw NotPositiveDefinite("preconditioner must be SPD");
  }
  Matrix q = v_eig.q_dense();
  Vector v_sqrt = v_eig.eigenvalues().cwiseSqrt();
  Matrix v_half = q * v_sqrt.asDiagonal() * q.transpose();
  Matrix v_mhalf = q * v_sqrt.cwiseInverse().asDiagonal() * q.transpose();

  Matrix p = Matrix::Identity(d, d) + (0.5 * theta * h) * v_d * a_d;
  Eigen::FullPivLU<Matrix> lu(p);
  if (!lu.isInvertible()) throw Singular("I + (theta h/2) VA is singular");
  Matrix g = lu.solve(Matrix::Identity(d, d) -
                      (0.5 * (1.0 - theta) * h) * v_d * a_d);
  Vector shift = lu.solve((0.5 * h) * v_d * target.shift());
  Matrix sigma_half = lu.solve(h * v_d);
  Matrix sigma = lu.solve(sigma_half.transpose()).transpose();
  sigma = 0.5 * (sigma + sigma.transpose());
  Ar1Proposal proposal(SquareOperator::from_dense(g), shift,
                       SymmetricOperator::from_dense(sigma));

  Matrix b_mat = v_half * a_d * v_half;
  b_mat = 0.5 * (b_mat + b_mat.transpose());
  Matrix w = Matrix::Identity(d, d) + ((theta - 0.5) * 0.5 * h) * b_mat;
  Matrix m =
      (2.0 / h) * v_mhalf *
      (w * (Matrix::Identity(d, d) + (0.5 * theta * h) * b_mat)) * v_mhalf;
  m = 0.5 * (m + m.transpose());
  Matrix n =
      (2.0 / h) * v_mhalf *
      (w * (Matrix::Identity(d, d) - (0.5 * (1.0 - theta) * h) * b_mat)) *
      v_mhalf;
  n = 0.5 * (n + n.transpose());
  Vector beta = v_mhalf * (w * (v_half * target.shift()));

  Eigen::SelfAdjointEigenSolver<Matrix> b_eig(b_mat, Eigen::EigenvaluesOnly);
  double tmax = h * b_eig.eigenvalues().maxCoeff();
  double tmin = h * b_eig.eigenvalues().minCoeff();
  double rho = std::max(std::abs(detail::langevin_mode_g(tmax, theta)),
                        std::abs(detail::langevin_mode_g(tmin, theta)));
  MatrixSplitting splitting = MatrixSplitting::with_known_radius(
      SquareOperator::from_dense(std::move(m)),
      SquareOperator::from_dense(std::move(n)), std::move(beta), rho);
  return ProposalPair{std::move(proposal), std::move(splitting)};
}

// ---------------------------------------------------------------------------
// Leapfrog HMC.  One leapfrog step is the affine map
//   [q; p] <- K [q; p] + J [0; h/2 b]
// and the L-step proposal is y = (K^L)_11 x + shift + (K^L)_12 p0 with
// p0 ~ N(0, V^-1).
// ---------------------------------------------------------------------------

struct HmcConfig {
  double h = 0.1;
  std::int64_t steps = 1;  // L
  std::optional<SymmetricOperator> preconditioner;  // mass matrix, default I

  double integration_time() const { return h * static_cast<double>(steps); }

  void validate() const {
    if (!(h > 0.0)) throw ConfigError("HMC step h must be positive");
    if (steps < 1) throw ConfigError("HMC needs at least one leapfrog step");
  }
};

// Blocks of the leapfrog L-step affine map.
struct HmcAffine {
  SquareOperator kl11, kl12, kl21, kl22;
  Vector shift_q;
  Vector shift_p;
};

class HmcTransfer {
 public:
  // K and J blocks (position/momentum ordering).
  const SquareOperator& k11() const { return k11_; }
  const SquareOperator& k12() const { return k12_; }
  const SquareOperator& k21() const { return k21_; }
  const SquareOperator& k22() const { return k22_; }
  const SquareOperator& j11() const { return j11_; }
  const SquareOperator& j12() const { return j12_; }
  const SquareOperator& j21() const { return j21_; }
  const SquareOperator& j22() const { return j22_; }

  // Per-mode rotation angles theta_i = -acos(1 - h^2/2 lambda_i^2), aligned
  // with lambda2().
  const Vector& theta() const { return theta_; }
  // Eigenvalues of VA (ascending for dense operators, coordinate order for
  // diagonal ones).
  const Vector& lambda2() const { return lambda2_; }

  Index dim() const { return k11_.dim(); }
  bool is_diagonal() const { return diagonal_; }
  double step() const { return h_; }

  // K^L and the accumulated shift (I-K)^-1 (I-K^L) J [0; h/2 b].
  HmcAffine affine(std::int64_t l_steps, const Vector& b) const {
    if (l_steps < 1) throw ConfigError("HMC needs at least one leapfrog step");
    if (diagonal_) return affine_diagonal(l_steps, b);
    return affine_dense(l_steps, b);
  }

 private:
  friend HmcTransfer hmc_transfer(const GaussianTarget&, const HmcConfig&);
  HmcTransfer(SquareOperator k11, SquareOperator k12, SquareOperator k21,
              SquareOperator k22, SquareOperator j11, SquareOperator j12,
              SquareOperator j21, SquareOperator j22, Vector theta,
              Vector lambda2, bool diagonal, double h)
      : k11_(std::move(k11)), k12_(std::move(k12)), k21_(std::move(k21)),
        k22_(std::move(k22)), j11_(std::move(j11)), j12_(std::move(j12)),
        j21_(std::move(j21)), j22_(std::move(j22)), theta_(std::move(theta)),
        lambda2_(std::move(lambda2)), diagonal_(diagonal), h_(h) {}

  HmcAffine affine_dense(std::int64_t l_steps, const Vector& b) const {
    const Index d = dim();
    Matrix k(2 * d, 2 * d);
    k.topLeftCorner(d, d) = k11_.to_dense();
    k.topRightCorner(d, d) = k12_.to_dense();
    k.bottomLeftCorner(d, d) = k21_.to_dense();
    k.bottomRightCorner(d, d) = k22_.to_dense();

    Matrix kl = Matrix::Identity(2 * d, 2 * d);
    Matrix base = k;
    std::int64_t e = l_steps;
    while (e > 0) {  // binary exponentiation
      if (e & 1) kl = kl * base;
      base = base * base;
      e >>= 1;
    }

    Vector w(2 * d);
    w.head(d) = j12_.apply(0.5 * h_ * b);
    w.tail(d) = j22_.apply(0.5 * h_ * b);
    Matrix i2d = Matrix::Identity(2 * d, 2 * d);
    Eigen::FullPivLU<Matrix> lu(i2d - k);
    if (!lu.isInvertible()) throw Singular("I - K singular");
    Vector shift = lu.solve((i2d - kl) * w);

    return HmcAffine{
        SquareOperator::from_dense(kl.topLeftCorner(d, d)),
        SquareOperator::from_dense(kl.topRightCorner(d, d)),
        SquareOperator::from_dense(kl.bottomLeftCorner(d, d)),
        SquareOperator::from_dense(kl.bottomRightCorner(d, d)),
        shift.head(d), shift.tail(d)};
  }

  HmcAffine affine_diagonal(std::int64_t l_steps, const Vector& b) const {
    const Index d = dim();
    Vector kl11(d), kl12(d), kl21(d), kl22(d), sq(d), sp(d);
    for (Index i = 0; i < d; ++i) {
      Eigen::Matrix2d ki;
      ki << k11_.diagonal_values()[i], k12_.diagonal_values()[i],
          k21_.diagonal_values()[i], k22_.diagonal_values()[i];
      Eigen::Matrix2d kl = Eigen::Matrix2d::Identity();
      Eigen::Matrix2d base = ki;
      std::int64_t e = l_steps;
      while (e > 0) {
        if (e & 1) kl = kl * base;
        base = base * base;
        e >>= 1;
      }
      kl11[i] = kl(0, 0);
      kl12[i] = kl(0, 1);
      kl21[i] = kl(1, 0);
      kl22[i] = kl(1, 1);
      Eigen::Vector2d w(j12_.diagonal_values()[i] * 0.5 * h_ * b[i],
                        j22_.diagonal_values()[i] * 0.5 * h_ * b[i]);
      Eigen::Matrix2d lhs = Eigen::Matrix2d::Identity() - ki;
      Eigen::Vector2d rhs = (Eigen::Matrix2d::Identity() - kl) * w;
      double det = lhs.determinant();
      if (det == 0.0) throw Singular("I - K singular");
      Eigen::Vector2d s = lhs.inverse() * rhs;
      sq[i] = s[0];
      sp[i] = s[1];
    }
    return HmcAffine{SquareOperator::from_diagonal(kl11),
                     SquareOperator::from_diagonal(kl12),
                     SquareOperator::from_diagonal(kl21),
                     SquareOperator::from_diagonal(kl22), std::move(sq),
                     std::move(sp)};
  }

  SquareOperator k11_, k12_, k21_, k22_;
  SquareOperator j11_, j12_, j21_, j22_;
  Vector theta_;
  Vector lambda2_;
  bool diagonal_;
  double h_;
};

namespace detail {

// Eigenvalues of VA; diagonal layout preserved in coordinate order, dense via
// the similar symmetric matrix V^{1/2} A V^{1/2} (ascending).
inline Vector va_eigenvalues(const SymmetricOperator& a,
                             const SymmetricOperator& v) {
  if (a.is_diagonal() && v.is_diagonal()) {
    return v.diagonal_values().cwiseProduct(a.diagonal_values());
  }
  SpectralDecomposition v_eig = spectral_decompose(v);
  if (v_eig.eigenvalues().minCoeff() <= 0.0) {
    throw NotPositiveDefinite("mass matrix must be SPD");
  }
  Matrix q = v_eig.q_dense();
  Vector vs = v_eig.eigenvalues().cwiseSqrt();
  Matrix v_half = q * vs.asDiagonal() * q.transpose();
  Matrix b = v_half * a.to_dense() * v_half;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (b + b.transpose()),
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw ConvergenceFailure("eigensolver did not converge");
  }
  return es.eigenvalues();
}

}  // namespace detail

inline HmcTransfer hmc_transfer(const GaussianTarget& target,
                                const HmcConfig& cfg) {
  cfg.validate();
  const Index d = target.dim();
  const double h = cfg.h;
  SymmetricOperator v = detail::effective_preconditioner(cfg.preconditioner, d);
  const SymmetricOperator& a = target.precision();

  Vector lambda2 = detail::va_eigenvalues(a, v);
  double stab = h * h * lambda2.maxCoeff();
  if (!(stab < 4.0)) {
    throw Unstable("h^2 lambda_max(VA) >= 4: leapfrog unstable");
  }
  Vector theta(d);
  for (Index i = 0; i < d; ++i) {
    theta[i] = -std::acos(1.0 - 0.5 * h * h * lambda2[i]);
  }

  const bool all_diag = a.is_diagonal() && v.is_diagonal();
  if (all_diag) {
    const Vector& av = a.diagonal_values();
    const Vector& vv = v.diagonal_values();
    Vector va = vv.cwiseProduct(av);
    Vector k11 = (1.0 - 0.5 * h * h * va.array()).matrix();
    Vector k12 = h * vv;
    Vector k21 =
        (-h * av.array() * (1.0 - 0.25 * h * h * va.array())).matrix();
    Vector k22 = k11;  // diagonal: VA = AV
    Vector j11 = Vector::Constant(d, 2.0);
    Vector j12 = h * vv;
    Vector j21 = -0.5 * h * av;
    Vector j22 = (2.0 - 0.5 * h * h * va.array()).matrix();
    return HmcTransfer(
        SquareOperator::from_diagonal(k11), SquareOperator::from_diagonal(k12),
        SquareOperator::from_diagonal(k21), SquareOperator::from_diagonal(k22),
        SquareOperator::from_diagonal(j11), SquareOperator::from_diagonal(j12),
        SquareOperator::from_diagonal(j21), SquareOperator::from_diagonal(j22),
        std::move(theta), std::move(va), true, h);
  }

  Matrix a_d = a.to_dense();
  Matrix v_d = v.to_dense();
  Matrix va = v_d * a_d;
  Matrix k11 = Matrix::Identity(d, d) - 0.5 * h * h * va;
  Matrix k12 = h * v_d;
  Matrix k21 = -h * a_d + 0.25 * h * h * h * a_d * va;
  Matrix k22 = Matrix::Identity(d, d) - 0.5 * h * h * va.transpose();
  Matrix j11 = 2.0 * Matrix::Identity(d, d);
  Matrix j12 = h * v_d;
  Matrix j21 = -0.5 * h * a_d;
  Matrix j22 = 2.0 * Matrix::Identity(d, d) - 0.5 * h * h * va.transpose();
  return HmcTransfer(
      SquareOperator::from_dense(std::move(k11)),
      SquareOperator::from_dense(std::move(k12)),
      SquareOperator::from_dense(std::move(k21)),
      SquareOperator::from_dense(std::move(k22)),
      SquareOperator::from_dense(std::move(j11)),
      SquareOperator::from_dense(std::move(j12)),
      SquareOperator::from_dense(std::move(j21)),
      SquareOperator::from_dense(std::move(j22)), std::move(theta),
      std::move(lambda2), false, h);
}

// Iteration-matrix eigenvalues G_i = cos(L theta_i) with
// theta_i = -acos(1 - h^2/2 lambda_i^2).
inline Vector hmc_mode_eigenvalues(const HmcConfig& cfg,
                                   const Eigen::Ref<const Vector>& lambda2) {
  cfg.validate();
  Vector out(lambda2.size());
  for (Index i = 0; i < lambda2.size(); ++i) {
    double z = 0.5 * cfg.h * cfg.h * lambda2[i];
    if (!(z < 2.0)) throw Unstable("h^2 lambda^2 >= 4: angle undefined");
    out[i] = std::cos(static_cast<double>(cfg.steps) * -std::acos(1.0 - z));
  }
  return out;
}

inline ProposalPair hmc_proposal(const GaussianTarget& target,
                                 const HmcConfig& cfg) {
  HmcTransfer transfer = hmc_transfer(target, cfg);
  const Index d = target.dim();
  SymmetricOperator v = detail::effective_preconditioner(cfg.preconditioner, d);

  // Resonant modes make (K^L)_12 singular: the proposal noise degenerates.
  double min_sin = 1.0;
  for (Index i = 0; i < d; ++i) {
    min_sin = std::min(
        min_sin,
        std::abs(std::sin(static_cast<double>(cfg.steps) * transfer.theta()[i])));
  }
  if (min_sin <= numerics().hmc_resonance_singular) {
    throw Singular("sin(L theta) = 0 for some mode: resonant trajectory");
  }
  if (min_sin < numerics().hmc_resonance_warning) {
    std::fprintf(stderr,
                 "splitmcmc: warning: near-resonant HMC mode "
                 "(|sin(L theta)| = %.3e), proposal noise ill-conditioned\n",
                 min_sin);
  }

  HmcAffine aff = transfer.affine(cfg.steps, target.shift());

  SymmetricOperator sigma = [&]() {
    if (aff.kl12.is_diagonal() && v.is_diagonal()) {
      Vector s = aff.kl12.diagonal_values().cwiseAbs2().cwiseQuotient(
          v.diagonal_values());
      return SymmetricOperator::from_diagonal(std::move(s));
    }
    Matrix kl12 = aff.kl12.to_dense();
    Matrix vinv_klt = spd_factorize(v).solve_matrix(kl12.transpose());
    Matrix s = kl12 * vinv_klt;
    return SymmetricOperator::from_dense(0.5 * (s + s.transpose()));
  }();

  try {
    Ar1Proposal proposal(aff.kl11, aff.shift_q, sigma);

    // Splitting: M = Sigma^-1 (I + G), N = M G, beta = M g; the symmetric
    // construction applies because G Sigma is symmetric.
    double rho = 0.0;
    for (Index i = 0; i < d; ++i) {
      rho = std::max(rho, std::abs(std::cos(static_cast<double>(cfg.steps) *
                                            transfer.theta()[i])));
    }
    if (aff.kl11.is_diagonal() && sigma.is_diagonal()) {
      const Vector& g = aff.kl11.diagonal_values();
      const Vector& sv = sigma.diagonal_values();
      Vector m = (1.0 + g.array()).matrix().cwiseQuotient(sv);
      Vector n = m.cwiseProduct(g);
      Vector beta = m.cwiseProduct(aff.shift_q);
      MatrixSplitting splitting = MatrixSplitting::with_known_radius(
          SquareOperator::from_diagonal(m), SquareOperator::from_diagonal(n),
          std::move(beta), rho);
      return ProposalPair{std::move(proposal), std::move(splitting)};
    }
    Matrix g = aff.kl11.to_dense();
    SpdFactorization sigma_f = spd_factorize(sigma);
    Matrix m = sigma_f.solve_matrix(Matrix::Identity(d, d) + g);
    m = 0.5 * (m + m.transpose());
    Matrix n = m * g;
    n = 0.5 * (n + n.transpose());
    Vector beta = m * aff.shift_q;
    MatrixSplitting splitting = MatrixSplitting::with_known_radius(
        SquareOperator::from_dense(std::move(m)),
        SquareOperator::from_dense(std::move(n)), std::move(beta), rho);
    return ProposalPair{std::move(proposal), std::move(splitting)};
  } catch (const NotPositiveDefinite&) {
    // Near-resonant trajectories degenerate the noise covariance before the
    // trig check trips.
    throw Singular("HMC proposal covariance numerically singular");
  }
}

// Explicit leapfrog integration of H(q, p) = 1/2 p^T V p + 1/2 q^T A q - b^T q.
inline std::pair<Vector, Vector> leapfrog(const GaussianTarget& target,
                                          const SymmetricOperator& v, double h,
                                          std::int64_t l_steps, Vector q,
                                          Vector p) {
  for (std::int64_t l = 0; l < l_steps; ++l) {
    p -= 0.5 * h * (target.precision().apply(q) - target.shift());
    q += h * v.apply(p);
    p -= 0.5 * h * (target.precision().apply(q) - target.shift());
  }
  return {std::move(q), std::move(p)};
}

inline double hamiltonian(const GaussianTarget& target,
                          const SymmetricOperator& v,
                          const Eigen::Ref<const Vector>& q,
                          const Eigen::Ref<const Vector>& p) {
  return 0.5 * v.quadratic_form(p) + 0.5 * target.precision().quadratic_form(q) -
         target.shift().dot(q);
}

}  // namespace splitmcmc
