#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "splitmcmc/proposals.hpp"

using namespace splitmcmc;

namespace {

Matrix random_spd(RandomStream& rng, Index d) {
  Matrix b(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) b(i, j) = rng.normal();
  }
  return b * b.transpose() / static_cast<double>(d) +
         0.5 * Matrix::Identity(d, d);
}

Vector random_positive(RandomStream& rng, Index d, double lo, double hi) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = lo + (hi - lo) * rng.uniform01();
  return v;
}

GaussianTarget diag_target(const Vector& a, const Vector& b) {
  return GaussianTarget(SymmetricOperator::from_diagonal(a), b);
}

double max_entry_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Mala, ScalarProposalMean) {
  Vector a(1);
  a << 1.0;
  GaussianTarget t = diag_target(a, Vector::Zero(1));
  ProposalPair pp = mala(t, 1.0);
  Vector x(1);
  x << 1.0;
  // With xi = 0 the proposal is the drift alone: y = (1 - h/2) x = 0.5.
  EXPECT_DOUBLE_EQ(pp.proposal.mean_given(x)[0], 0.5);
}

TEST(Mala, ScalarSplittingValues) {
  Vector a(1), b(1);
  a << 1.0;
  b << 0.7;
  GaussianTarget t = diag_target(a, b);
  ProposalPair pp = mala(t, 1.0);
  EXPECT_NEAR(pp.splitting.split_m().diagonal_values()[0], 1.5, 1e-15);
  EXPECT_NEAR(pp.splitting.split_n().diagonal_values()[0], 0.75, 1e-15);
  EXPECT_NEAR(pp.splitting.proposal_precision().diagonal_values()[0], 0.75,
              1e-15);
  EXPECT_NEAR(pp.splitting.beta()[0], 0.75 * 0.7, 1e-15);
}

TEST(Mala, SplittingMatchesSymmetricConversion) {
  RandomStream rng(101);
  Vector a = random_positive(rng, 6, 0.3, 3.0);
  GaussianTarget t = diag_target(a, rng.normal_vector(6));
  ProposalPair pp = mala(t, 0.1);
  MatrixSplitting via_ar1 = symmetric_ar1_to_splitting(pp.proposal);
  EXPECT_LE(max_entry_diff(pp.splitting.split_m().to_dense(),
                           via_ar1.split_m().to_dense()),
            1e-12);
  EXPECT_LE(max_entry_diff(pp.splitting.split_n().to_dense(),
                           via_ar1.split_n().to_dense()),
            1e-12);
  EXPECT_LE((pp.splitting.beta() - via_ar1.beta()).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Mala, ConvergenceBoundary) {
  Vector a(2);
  a << 1.0, 2.5;
  GaussianTarget t = diag_target(a, Vector::Zero(2));
  double lmax = 2.5;
  EXPECT_TRUE(mala(t, (4.0 - 1e-6) / lmax).splitting.convergent());
  EXPECT_FALSE(mala(t, (4.0 + 1e-6) / lmax).splitting.convergent());
  EXPECT_THROW(mala(t, (4.0 + 1e-6) / lmax, /*require_convergent=*/true),
               StepTooLarge);
  EXPECT_NO_THROW(mala(t, (4.0 - 1e-6) / lmax, true));
}

TEST(Mala, NoiseIsScaledIdentity) {
  RandomStream rng(103);
  Vector a = random_positive(rng, 4, 0.5, 2.0);
  GaussianTarget t = diag_target(a, Vector::Zero(4));
  ProposalPair pp = mala(t, 0.37);
  EXPECT_LE((pp.proposal.noise_covariance().diagonal_values().array() - 0.37)
                .abs()
                .maxCoeff(),
            1e-15);
}

TEST(UlaChain, ZeroStepsIsEmpty) {
  Vector a(2);
  a << 1.0, 2.0;
  GaussianTarget t = diag_target(a, Vector::Zero(2));
  RandomStream rng(105);
  ChainResult res = ula_chain(t, 0.5, 0, rng);
  EXPECT_EQ(res.n_samples, 0);
  EXPECT_EQ(res.accept_count, 0);
}

TEST(UlaChain, RequiresConvergentStep) {
  Vector a(1);
  a << 2.0;
  GaussianTarget t = diag_target(a, Vector::Zero(1));
  RandomStream rng(106);
  EXPECT_THROW(ula_chain(t, 2.1, 100, rng), StepTooLarge);
}

TEST(ThetaLangevin, ThetaZeroReducesToMala) {
  RandomStream rng(107);
  Vector a = random_positive(rng, 5, 0.3, 3.0);
  GaussianTarget t = diag_target(a, rng.normal_vector(5));
  LangevinConfig cfg;
  cfg.h = 0.3;
  cfg.theta = 0.0;
  ProposalPair lang = theta_langevin(t, cfg);
  ProposalPair ml = mala(t, 0.3);
  EXPECT_LE(max_entry_diff(lang.proposal.iteration_matrix().to_dense(),
                           ml.proposal.iteration_matrix().to_dense()),
            1e-14);
  EXPECT_LE((lang.proposal.shift() - ml.proposal.shift()).norm(), 1e-14);
  EXPECT_LE(max_entry_diff(lang.proposal.noise_covariance().to_dense(),
                           ml.proposal.noise_covariance().to_dense()),
            1e-14);
  EXPECT_LE(max_entry_diff(lang.splitting.split_m().to_dense(),
                           ml.splitting.split_m().to_dense()),
            1e-12);
}

TEST(ThetaLangevin, CrankNicolsonScalar) {
  // theta = 1/2, A = 2, h = 1: G = (1 - 1/2) / (1 + 1/2) = 1/3, calA = A.
  Vector a(1);
  a << 2.0;
  GaussianTarget t = diag_target(a, Vector::Zero(1));
  LangevinConfig cfg;
  cfg.h = 1.0;
  cfg.theta = 0.5;
  ProposalPair pp = theta_langevin(t, cfg);
  EXPECT_NEAR(pp.proposal.iteration_matrix().diagonal_values()[0], 1.0 / 3.0,
              1e-15);
  EXPECT_NEAR(pp.splitting.proposal_precision().diagonal_values()[0], 2.0,
              1e-15);
}

TEST(ThetaLangevin, CrankNicolsonExactness) {
  // theta = 1/2 makes the proposal target equal the target exactly.
  RandomStream rng(109);
  Vector a = random_positive(rng, 6, 0.3, 3.0);
  Vector b = rng.normal_vector(6);
  GaussianTarget t = diag_target(a, b);
  LangevinConfig cfg;
  cfg.h = 0.8;
  cfg.theta = 0.5;
  ProposalPair pp = theta_langevin(t, cfg);
  EXPECT_LE((pp.splitting.proposal_precision().diagonal_values() - a).norm(),
            1e-14);
  EXPECT_LE((pp.splitting.beta() - b).norm(), 1e-14);
}

TEST(ThetaLangevin, SplittingIdentitiesAcrossThetaGrid) {
  RandomStream rng(113);
  const Index d = 4;
  Matrix a = random_spd(rng, d);
  Vector b = rng.normal_vector(d);
  GaussianTarget t(SymmetricOperator::from_dense(a), b);
  for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (bool with_v : {false, true}) {
      LangevinConfig cfg;
      cfg.h = 0.2;
      cfg.theta = theta;
      if (with_v) {
        cfg.preconditioner = SymmetricOperator::from_dense(random_spd(rng, d));
      }
      ProposalPair pp = theta_langevin(t, cfg);
      // G Sigma symmetric for every theta and V.
      Matrix gs = pp.proposal.iteration_matrix().to_dense() *
                  pp.proposal.noise_covariance().to_dense();
      EXPECT_LE((gs - gs.transpose()).norm(), 1e-12 * std::max(1.0, gs.norm()));
      // M - N = calA.
      EXPECT_LE(max_entry_diff(pp.splitting.split_m().to_dense() -
                                   pp.splitting.split_n().to_dense(),
                               pp.splitting.proposal_precision().to_dense()),
                1e-12);
      // Splitting and AR(1) forms describe the same process.
      Ar1Proposal back = splitting_to_ar1(pp.splitting);
      EXPECT_LE(max_entry_diff(back.iteration_matrix().to_dense(),
                               pp.proposal.iteration_matrix().to_dense()),
                1e-10);
      EXPECT_LE((back.shift() - pp.proposal.shift()).norm(), 1e-10);
      EXPECT_LE(max_entry_diff(back.noise_covariance().to_dense(),
                               pp.proposal.noise_covariance().to_dense()),
                1e-10);
    }
  }
}

TEST(ThetaLangevin, ThetaOneIdentities) {
  RandomStream rng(117);
  Vector a = random_positive(rng, 5, 0.3, 3.0);
  GaussianTarget t = diag_target(a, rng.normal_vector(5));
  LangevinConfig cfg;
  cfg.h = 0.2;
  cfg.theta = 1.0;
  ProposalPair pp = theta_langevin(t, cfg);
  Vector m = pp.splitting.split_m().diagonal_values();
  Vector n = pp.splitting.split_n().diagonal_values();
  Vector cal = pp.splitting.proposal_precision().diagonal_values();
  EXPECT_LE((m - n - cal).cwiseAbs().maxCoeff(), 1e-12);
  // calA = (I + (h/4) A) A for theta = 1.
  Vector expect = ((1.0 + 0.05 * a.array()) * a.array()).matrix();
  EXPECT_LE((cal - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ThetaLangevin, ValidatesConfig) {
  Vector a(1);
  a << 1.0;
  GaussianTarget t = diag_target(a, Vector::Zero(1));
  LangevinConfig bad;
  bad.h = -0.1;
  EXPECT_THROW(theta_langevin(t, bad), ConfigError);
  bad.h = 0.1;
  bad.theta = 1.5;
  EXPECT_THROW(theta_langevin(t, bad), ConfigError);
}

TEST(HmcTransfer, SingleStepBlocksMatchClosedForm) {
  RandomStream rng(119);
  Vector a = random_positive(rng, 4, 0.5, 2.0);
  GaussianTarget t = diag_target(a, Vector::Zero(4));
  HmcConfig cfg;
  cfg.h = 0.5;
  cfg.steps = 1;
  HmcTransfer tr = hmc_transfer(t, cfg);
  // K11 = I - h^2/2 A equals the MALA iteration matrix at step h^2.
  Vector mala_g = (1.0 - 0.5 * cfg.h * cfg.h * a.array()).matrix();
  EXPECT_LE((tr.k11().diagonal_values() - mala_g).cwiseAbs().maxCoeff(),
            1e-15);
  EXPECT_LE((tr.k12().diagonal_values().array() - cfg.h).abs().maxCoeff(),
            1e-15);
}

TEST(HmcTransfer, LeapfrogLoopMatchesAffineMap) {
  RandomStream rng(121);
  for (bool dense : {false, true}) {
    const Index d = dense ? 3 : 4;
    GaussianTarget t =
        dense ? GaussianTarget(SymmetricOperator::from_dense(random_spd(rng, d)),
                               rng.normal_vector(d))
              : diag_target(random_positive(rng, d, 0.5, 2.0),
                            rng.normal_vector(d));
    SymmetricOperator v =
        dense ? SymmetricOperator::identity(d)
              : SymmetricOperator::from_diagonal(
                    random_positive(rng, d, 0.5, 1.5));
    HmcConfig cfg;
    cfg.h = 0.25;
    cfg.steps = 5;
    cfg.preconditioner = v;
    HmcTransfer tr = hmc_transfer(t, cfg);
    HmcAffine aff = tr.affine(cfg.steps, t.shift());
    for (int rep = 0; rep < 4; ++rep) {
      Vector q0 = rng.normal_vector(d);
      Vector p0 = rng.normal_vector(d);
      auto [ql, pl] = leapfrog(t, v, cfg.h, cfg.steps, q0, p0);
      Vector qm = aff.kl11.apply(q0) + aff.kl12.apply(p0) + aff.shift_q;
      Vector pm = aff.kl21.apply(q0) + aff.kl22.apply(p0) + aff.shift_p;
      EXPECT_LE((ql - qm).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((pl - pm).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(HmcTransfer, UnstableStepRejected) {
  Vector a(1);
  a << 2.0;
  GaussianTarget t = diag_target(a, Vector::Zero(1));
  HmcConfig cfg;
  cfg.h = std::sqrt(2.0) + 1e-6;  // h^2 lambda^2 just over 4
  cfg.steps = 2;
  EXPECT_THROW(hmc_transfer(t, cfg), Unstable);
}

TEST(HmcModeEigenvalues, BoundaryAndSingleStep) {
  // h^2 lambda^2 / 2 = 1 gives theta = -pi/2; two steps rotate to cos(pi) = -1.
  HmcConfig cfg;
  cfg.h = std::sqrt(2.0);
  cfg.steps = 2;
  Vector lambda2(1);
  lambda2 << 1.0;
  Vector g = hmc_mode_eigenvalues(cfg, lambda2);
  EXPECT_NEAR(g[0], -1.0, 1e-12);

  HmcConfig one;
  one.h = 0.37;
  one.steps = 1;
  Vector l2(3);
  l2 << 0.5, 1.0, 2.0;
  Vector g1 = hmc_mode_eigenvalues(one, l2);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(g1[i], 1.0 - 0.5 * one.h * one.h * l2[i], 1e-14);
  }
}

TEST(HmcModeEigenvalues, MatchDensePoweredBlock) {
  RandomStream rng(127);
  const Index d = 6;
  Vector a = random_positive(rng, d, 0.5, 2.0);
  GaussianTarget dense_t(
      SymmetricOperator::from_dense(Matrix(a.asDiagonal())), Vector::Zero(d));
  HmcConfig cfg;
  cfg.h = 0.4;
  cfg.steps = 5;
  HmcTransfer tr = hmc_transfer(dense_t, cfg);
  HmcAffine aff = tr.affine(cfg.steps, Vector::Zero(d));
  Eigen::EigenSolver<Matrix> es(aff.kl11.to_dense(), false);
  Vector dense_eigs = es.eigenvalues().real();
  std::sort(dense_eigs.data(), dense_eigs.data() + d);
  Vector trig = hmc_mode_eigenvalues(cfg, a);
  std::sort(trig.data(), trig.data() + d);
  EXPECT_LE((dense_eigs - trig).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(HmcModeEigenvalues, AlwaysInUnitInterval) {
  RandomStream rng(131);
  for (int rep = 0; rep < 20; ++rep) {
    HmcConfig cfg;
    cfg.h = 0.1 + rng.uniform01();
    cfg.steps = 1 + static_cast<std::int64_t>(rng.uniform01() * 10);
    Vector l2 = random_positive(rng, 8, 0.01, 3.9 / (cfg.h * cfg.h));
    Vector g = hmc_mode_eigenvalues(cfg, l2);
    EXPECT_LE(g.maxCoeff(), 1.0 + 1e-15);
    EXPECT_GE(g.minCoeff(), -1.0 - 1e-15);
  }
}

TEST(HmcProposal, ProposalTargetMeanMatchesTarget) {
  RandomStream rng(137);
  const Index d = 6;
  Vector a = random_positive(rng, d, 0.5, 2.0);
  Vector b = rng.normal_vector(d);
  GaussianTarget t = diag_target(a, b);
  HmcConfig cfg;
  cfg.h = 0.35;
  cfg.steps = 3;
  ProposalPair pp = hmc_proposal(t, cfg);
  ProposalTarget pt = proposal_target(pp.splitting);
  EXPECT_LE((pt.mean - t.mean()).norm(), 1e-8);
}

TEST(HmcProposal, SingleStepEqualsMalaAtSquaredStep) {
  RandomStream rng(139);
  const Index d = 5;
  Vector a = random_positive(rng, d, 0.5, 2.0);
  Vector b = rng.normal_vector(d);
  GaussianTarget t = diag_target(a, b);
  double h = 0.4;
  HmcConfig cfg;
  cfg.h = h;
  cfg.steps = 1;
  ProposalPair hm = hmc_proposal(t, cfg);
  ProposalPair ml = mala(t, h * h);
  EXPECT_LE(max_entry_diff(hm.proposal.iteration_matrix().to_dense(),
                           ml.proposal.iteration_matrix().to_dense()),
            1e-12);
  EXPECT_LE((hm.proposal.shift() - ml.proposal.shift()).norm(), 1e-12);
  EXPECT_LE(max_entry_diff(hm.proposal.noise_covariance().to_dense(),
                           ml.proposal.noise_covariance().to_dense()),
            1e-12);
  EXPECT_LE(max_entry_diff(hm.splitting.split_m().to_dense(),
                           ml.splitting.split_m().to_dense()),
            1e-12);
}

TEST(HmcProposal, ResonanceRaisesSingular) {
  // L theta = pi exactly: h^2 lambda^2 / 2 = 1 - cos(pi / L).
  HmcConfig cfg;
  cfg.h = 1.0;
  cfg.steps = 2;
  Vector a(1);
  a << 2.0;  // theta = -acos(1 - 1) = -pi/2; L theta = -pi
  GaussianTarget t = diag_target(a, Vector::Zero(1));
  EXPECT_THROW(hmc_proposal(t, cfg), Singular);
}

TEST(HmcProposal, NoiseCovarianceMatchesMomentumContract) {
  // Sampling y = G x + shift + noise with Sigma = (K^L)_12 V^-1 (K^L)_12^T is
  // the same law as running leapfrog with p0 ~ N(0, V^-1).
  RandomStream rng(149);
  const Index d = 2;
  Vector a(d), vdiag(d);
  a << 0.8, 1.7;
  vdiag << 1.3, 0.6;
  GaussianTarget t = diag_target(a, Vector::Zero(d));
  SymmetricOperator v = SymmetricOperator::from_diagonal(vdiag);
  HmcConfig cfg;
  cfg.h = 0.3;
  cfg.steps = 4;
  cfg.preconditioner = v;
  ProposalPair pp = hmc_proposal(t, cfg);
  Vector x(d);
  x << 0.4, -0.2;
  const int n = 40000;
  Vector mean = Vector::Zero(d);
  Matrix second = Matrix::Zero(d, d);
  Vector vinv_sqrt = vdiag.cwiseInverse().cwiseSqrt();
  for (int k = 0; k < n; ++k) {
    Vector p0 = vinv_sqrt.cwiseProduct(rng.normal_vector(d));
    auto [y, pl] = leapfrog(t, v, cfg.h, cfg.steps, x, p0);
    mean += y;
    second += y * y.transpose();
  }
  mean /= n;
  Matrix cov = second / n - mean * mean.transpose();
  EXPECT_LE((mean - pp.proposal.mean_given(x)).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LE(max_entry_diff(cov, pp.proposal.noise_covariance().to_dense()),
            0.05);
}

TEST(HmcEnergy, BoundedOscillatoryError) {
  RandomStream rng(151);
  const Index d = 5;
  Vector a = random_positive(rng, d, 0.5, 2.0);
  Vector b = rng.normal_vector(d);
  GaussianTarget t = diag_target(a, b);
  SymmetricOperator v = SymmetricOperator::identity(d);
  const double h = 0.3;  // h^2 lambda_max < 4 comfortably

  // Many short trajectories from equilibrium: energy error stays small.
  double max_err = 0.0;
  for (int traj = 0; traj < 1000; ++traj) {
    Vector q = t.exact_sample(rng);
    Vector p = rng.normal_vector(d);
    double h0 = hamiltonian(t, v, q, p);
    auto [ql, pl] = leapfrog(t, v, h, 20, q, p);
    max_err = std::max(max_err, std::abs(hamiltonian(t, v, ql, pl) - h0));
  }
  EXPECT_LE(max_err, 0.5);

  // One long trajectory: the error oscillates instead of drifting.
  Vector q = t.exact_sample(rng);
  Vector p = rng.normal_vector(d);
  double h0 = hamiltonian(t, v, q, p);
  double max_first_quarter = 0.0, max_total = 0.0;
  Vector qq = q, pp = p;
  const int total = 400;
  for (int l = 0; l < total; ++l) {
    auto [q1, p1] = leapfrog(t, v, h, 1, qq, pp);
    qq = q1;
    pp = p1;
    double err = std::abs(hamiltonian(t, v, qq, pp) - h0);
    max_total = std::max(max_total, err);
    if (l < total / 4) max_first_quarter = std::max(max_first_quarter, err);
  }
  EXPECT_LE(max_total, 3.0 * max_first_quarter + 1e-12);
}

TEST(HmcConfig, Validation) {
  HmcConfig cfg;
  cfg.h = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.h = 0.1;
  cfg.steps = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
