#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "splitmcmc/proposals.hpp"
#include "splitmcmc/sampler.hpp"

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

ProposalPair crank_nicolson_pair(const GaussianTarget& t, double h) {
  LangevinConfig cfg;
  cfg.h = h;
  cfg.theta = 0.5;
  return theta_langevin(t, cfg);
}

}  // namespace

TEST(QuadraticRatio, ZeroWhenProposalTargetsTarget) {
  RandomStream rng(201);
  Vector a = (rng.normal_vector(4).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), rng.normal_vector(4));
  ProposalPair pp = crank_nicolson_pair(t, 0.6);
  for (int k = 0; k < 10; ++k) {
    Vector x = rng.normal_vector(4);
    Vector y = rng.normal_vector(4);
    // calA = M - N as stored, so the cancellation is exact up to roundoff.
    EXPECT_NEAR(log_accept_ratio_quadratic(t, pp.splitting, x, y), 0.0, 1e-12);
  }
}

TEST(QuadraticRatio, ZeroWhenStationary) {
  RandomStream rng(203);
  Vector a = (rng.normal_vector(3).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), rng.normal_vector(3));
  ProposalPair pp = mala(t, 0.4);
  Vector x = rng.normal_vector(3);
  EXPECT_EQ(log_accept_ratio_quadratic(t, pp.splitting, x, x), 0.0);
}

TEST(QuadraticRatio, MatchesDensityRatioOracle) {
  RandomStream rng(207);
  const Index d = 5;
  GaussianTarget t(SymmetricOperator::from_dense(random_spd(rng, d)),
                   rng.normal_vector(d));
  LangevinConfig cfg;
  cfg.h = 0.25;
  cfg.theta = 0.2;
  ProposalPair pp = theta_langevin(t, cfg);
  LogDensity logpi = LogDensity::from_target(t);
  for (int k = 0; k < 50; ++k) {
    Vector x = rng.normal_vector(d);
    Vector y = rng.normal_vector(d);
    double quad = log_accept_ratio_quadratic(t, pp.splitting, x, y);
    double gen = log_accept_ratio_generic(logpi, pp.proposal, x, y);
    EXPECT_NEAR(quad, gen, 1e-10);
  }
}

TEST(QuadraticRatio, RejectsAsymmetricSplitting) {
  RandomStream rng(209);
  const Index d = 3;
  Matrix g(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  }
  g *= 0.5 / spectral_radius(g);
  Ar1Proposal p(SquareOperator::from_dense(g), Vector::Zero(d),
                SymmetricOperator::from_dense(random_spd(rng, d)));
  MatrixSplitting s = ar1_to_splitting(p);  // general path: M asymmetric
  GaussianTarget t(SymmetricOperator::from_dense(random_spd(rng, d)),
                   Vector::Zero(d));
  EXPECT_THROW(
      log_accept_ratio_quadratic(t, s, Vector::Zero(d), Vector::Ones(d)),
      NotSymmetricSplitting);
}

TEST(GenericRatio, SymmetricProposalReducesToDensityDifference) {
  // Random walk (G = I, g = 0) with isotropic Sigma has a symmetric kernel,
  // so the ratio is log pi(y) - log pi(x).
  RandomStream rng(211);
  const Index d = 4;
  Ar1Proposal p(SquareOperator::identity(d), Vector::Zero(d),
                SymmetricOperator::from_diagonal(Vector::Constant(d, 0.7)));
  GaussianTarget t(SymmetricOperator::identity(d), Vector::Zero(d));
  LogDensity logpi = LogDensity::from_target(t);
  for (int k = 0; k < 20; ++k) {
    Vector x = rng.normal_vector(d);
    Vector y = rng.normal_vector(d);
    double ratio = log_accept_ratio_generic(logpi, p, x, y);
    EXPECT_NEAR(ratio, logpi(y) - logpi(x), 1e-12);
  }
  Vector x = rng.normal_vector(d);
  EXPECT_DOUBLE_EQ(log_accept_ratio_generic(logpi, p, x, x), 0.0);
}

TEST(RunChain, AllAcceptedWhenExact) {
  RandomStream rng(213);
  Vector a = (rng.normal_vector(3).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), rng.normal_vector(3));
  ProposalPair pp = crank_nicolson_pair(t, 0.5);
  ChainConfig cfg;
  cfg.n_steps = 500;
  RandomStream chain_rng(214);
  ChainResult res = run_chain(t, pp, cfg, chain_rng);
  EXPECT_EQ(res.accept_count, res.n_steps);
  EXPECT_NEAR(res.z_mean(), 0.0, 1e-14);
}

TEST(RunChain, BurnInEqualNStepsGivesEmptyStatistics) {
  Vector a(2);
  a << 1.0, 2.0;
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(2));
  ProposalPair pp = mala(t, 0.5);
  ChainConfig cfg;
  cfg.n_steps = 100;
  cfg.burn_in = 100;
  cfg.esjd_directions = {Vector::Unit(2, 0)};
  RandomStream rng(215);
  ChainResult res = run_chain(t, pp, cfg, rng);
  EXPECT_EQ(res.n_samples, 0);
  EXPECT_EQ(res.z_count, 0);
  EXPECT_EQ(res.directions[0].n_jumps, 0);
  EXPECT_TRUE(res.directions[0].projected.empty());
}

TEST(RunChain, InvalidBurnInRejected) {
  Vector a(1);
  a << 1.0;
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(1));
  ProposalPair pp = mala(t, 0.5);
  ChainConfig cfg;
  cfg.n_steps = 10;
  cfg.burn_in = 11;
  RandomStream rng(216);
  EXPECT_THROW(run_chain(t, pp, cfg, rng), ConfigError);
}

TEST(RunChain, DeterministicGivenSeedStreamConfig) {
  RandomStream rng(217);
  Vector a = (rng.normal_vector(4).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), rng.normal_vector(4));
  ProposalPair pp = mala(t, 0.6);
  ChainConfig cfg;
  cfg.n_steps = 2000;
  cfg.burn_in = 100;
  cfg.esjd_directions = {Vector::Unit(4, 0), Vector::Unit(4, 3)};
  RandomStream r1(99, 5), r2(99, 5);
  ChainResult a1 = run_chain(t, pp, cfg, r1);
  ChainResult a2 = run_chain(t, pp, cfg, r2);
  EXPECT_EQ(a1.accept_count, a2.accept_count);
  EXPECT_EQ(a1.mean_sum, a2.mean_sum);
  EXPECT_EQ(a1.z_sum, a2.z_sum);
  EXPECT_EQ(a1.directions[0].sum_jump_sq, a2.directions[0].sum_jump_sq);
  EXPECT_EQ(a1.directions[1].sum_lag, a2.directions[1].sum_lag);
}

TEST(RunChain, QuadraticAndGenericPathsAgree) {
  // The same chain driven by the quadratic path and by the generic path
  // consumes the same randomness and must match move for move.
  RandomStream rng(219);
  Vector a = (rng.normal_vector(3).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), rng.normal_vector(3));
  ProposalPair pp = mala(t, 0.7);
  ChainConfig cfg;
  cfg.n_steps = 1000;
  cfg.start = ChainConfig::Start::Explicit;
  cfg.start_point = t.mean();

  RandomStream r1(7, 1);
  ChainResult quad = run_chain(t, pp, cfg, r1);

  LogDensity logpi = LogDensity::from_target(t);
  RandomStream r2(7, 1);
  ChainResult gen = run_chain(logpi, pp.proposal, cfg, r2);
  EXPECT_EQ(quad.accept_count, gen.accept_count);
  EXPECT_LE((quad.mean_sum - gen.mean_sum).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(quad.z_sum, gen.z_sum, 1e-8);
}

TEST(RunChain, GenericTargetNeedsExplicitStart) {
  LogDensity quartic(
      [](const Vector& x) { return -0.25 * x.array().pow(4).sum(); }, nullptr);
  Ar1Proposal p(SquareOperator::from_diagonal(Vector::Zero(1)),
                Vector::Zero(1),
                SymmetricOperator::from_diagonal(Vector::Constant(1, 1.0)));
  ChainConfig cfg;
  cfg.n_steps = 10;
  RandomStream rng(221);
  EXPECT_THROW(run_chain(quartic, p, cfg, rng), ConfigError);
}

TEST(RunChain, GenericQuarticTargetMixes) {
  // Generic MH path with a non-Gaussian log density and an independence
  // AR(1) proposal: acceptance strictly inside (0, 1) and bounded moments.
  LogDensity quartic(
      [](const Vector& x) { return -0.25 * x.array().pow(4).sum(); }, nullptr);
  Ar1Proposal p(SquareOperator::from_diagonal(Vector::Zero(2)),
                Vector::Zero(2),
                SymmetricOperator::from_diagonal(Vector::Constant(2, 1.0)));
  ChainConfig cfg;
  cfg.n_steps = 20000;
  cfg.burn_in = 1000;
  cfg.start = ChainConfig::Start::Explicit;
  cfg.start_point = Vector::Zero(2);
  RandomStream rng(223);
  ChainResult res = run_chain(quartic, p, cfg, rng);
  EXPECT_GT(res.accept_rate(), 0.2);
  EXPECT_LT(res.accept_rate(), 0.99);
  // E[x^2] for exp(-x^4/4) is 2 Gamma(3/4) / Gamma(1/4) ~ 0.676.
  Vector var = res.empirical_variance();
  EXPECT_NEAR(var[0], 0.676, 0.05);
  EXPECT_NEAR(var[1], 0.676, 0.05);
}

TEST(RunChain, StartModes) {
  RandomStream rng(227);
  Vector a = (rng.normal_vector(2).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), rng.normal_vector(2));
  ProposalPair pp = mala(t, 0.4);
  for (auto start : {ChainConfig::Start::ExactSample,
                     ChainConfig::Start::ProposalTarget}) {
    ChainConfig cfg;
    cfg.n_steps = 50;
    cfg.start = start;
    RandomStream r(229);
    EXPECT_NO_THROW(run_chain(t, pp, cfg, r));
  }
}

TEST(RunParallelChains, SingleChainMatchesRunChain) {
  RandomStream rng(231);
  Vector a = (rng.normal_vector(3).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(3));
  ProposalPair pp = mala(t, 0.5);
  ChainConfig cfg;
  cfg.n_steps = 500;
  std::vector<ChainResult> many =
      run_parallel_chains(t, pp, cfg, 42, 7, 1);
  RandomStream direct(42, 7);
  ChainResult single = run_chain(t, pp, cfg, direct);
  EXPECT_EQ(many[0].accept_count, single.accept_count);
  EXPECT_EQ(many[0].mean_sum, single.mean_sum);
}

TEST(RunParallelChains, StreamsDifferAndPoolingIsWeightedMean) {
  RandomStream rng(233);
  Vector a = (rng.normal_vector(2).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(2));
  ProposalPair pp = mala(t, 0.8);
  ChainConfig cfg;
  cfg.n_steps = 2000;
  std::vector<ChainResult> chains =
      run_parallel_chains(t, pp, cfg, 42, 0, 8, /*max_threads=*/2);
  ASSERT_EQ(chains.size(), 8u);
  EXPECT_NE(chains[0].mean_sum, chains[1].mean_sum);
  std::int64_t total_acc = 0, total_steps = 0;
  double weighted = 0.0;
  for (const ChainResult& c : chains) {
    total_acc += c.accept_count;
    total_steps += c.n_steps;
    weighted += c.accept_rate() * c.n_steps;
  }
  EXPECT_NEAR(static_cast<double>(total_acc) / total_steps,
              weighted / total_steps, 1e-15);
}

TEST(RunParallelChains, SchedulingIndependence) {
  RandomStream rng(237);
  Vector a = (rng.normal_vector(2).array().abs() + 0.5).matrix();
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(2));
  ProposalPair pp = mala(t, 0.5);
  ChainConfig cfg;
  cfg.n_steps = 500;
  std::vector<ChainResult> serial =
      run_parallel_chains(t, pp, cfg, 1, 0, 4, /*max_threads=*/1);
  std::vector<ChainResult> threaded =
      run_parallel_chains(t, pp, cfg, 1, 0, 4, /*max_threads=*/4);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(serial[k].accept_count, threaded[k].accept_count);
    EXPECT_EQ(serial[k].mean_sum, threaded[k].mean_sum);
  }
}

TEST(TraceCsv, SchemaAndContent) {
  Vector a(2);
  a << 1.0, 2.0;
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(2));
  ProposalPair pp = mala(t, 0.5);
  ChainConfig cfg;
  cfg.n_steps = 20;
  cfg.burn_in = 5;
  cfg.store_trace = true;
  RandomStream rng(239);
  ChainResult res = run_chain(t, pp, cfg, rng);
  ASSERT_EQ(res.trace_step.size(), 15u);
  std::ostringstream out;
  write_trace_csv(out, res);
  std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,accepted,z,x_0,x_1");
  // First recorded step index is burn_in.
  EXPECT_EQ(res.trace_step.front(), 5);
}

TEST(TraceCsv, CoordinatesDroppedAboveDimensionCap) {
  const Index d = numerics().trace_dim_cap + 10;
  GaussianTarget t(SymmetricOperator::from_diagonal(Vector::Ones(d)),
                   Vector::Zero(d));
  ProposalPair pp = mala(t, 0.5);
  ChainConfig cfg;
  cfg.n_steps = 10;
  cfg.store_trace = true;
  RandomStream rng(241);
  ChainResult res = run_chain(t, pp, cfg, rng);
  EXPECT_EQ(res.trace_step.size(), 10u);  // scalar columns still recorded
  EXPECT_EQ(res.trace_x.size(), 0);       // x columns dropped
  std::ostringstream out;
  write_trace_csv(out, res);
  std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,accepted,z");
}
