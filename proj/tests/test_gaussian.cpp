#include <gtest/gtest.h>

#include <cmath>

#include "splitmcmc/gaussian.hpp"

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

}  // namespace

TEST(LogDensityUnnorm, TrivialValues) {
  GaussianTarget std2(SymmetricOperator::identity(2), Vector::Zero(2));
  EXPECT_DOUBLE_EQ(std2.log_density_unnorm(Vector::Zero(2)), 0.0);

  Vector a(1), b(1), x(1);
  a << 2.0;
  b << 2.0;
  x << 1.0;
  GaussianTarget t(SymmetricOperator::from_diagonal(a), b);
  EXPECT_DOUBLE_EQ(t.log_density_unnorm(x), -1.0 + 2.0);
}

TEST(LogDensityUnnorm, LongHandOracle) {
  RandomStream rng(31);
  Matrix a = random_spd(rng, 4);
  Vector b = rng.normal_vector(4);
  Vector x = rng.normal_vector(4);
  GaussianTarget t(SymmetricOperator::from_dense(a), b);
  // Quadratic form evaluated long-hand.
  double quad = 0.0;
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) quad += x[i] * a(i, j) * x[j];
  }
  double lin = 0.0;
  for (Index i = 0; i < 4; ++i) lin += b[i] * x[i];
  EXPECT_NEAR(t.log_density_unnorm(x), -0.5 * quad + lin, 1e-12);
}

TEST(LogDensityUnnorm, DimensionMismatch) {
  GaussianTarget t(SymmetricOperator::identity(2), Vector::Zero(2));
  EXPECT_THROW(t.log_density_unnorm(Vector::Zero(3)), DimensionMismatch);
}

TEST(ExactSample, IdentityPrecisionReturnsNoise) {
  GaussianTarget t(SymmetricOperator::identity(2), Vector::Zero(2));
  RandomStream rng(5);
  RandomStream replay(5);
  Vector draw = t.exact_sample(rng);
  Vector xi = replay.normal_vector(2);
  EXPECT_LE((draw - xi).norm(), 1e-15);
}

TEST(ExactSample, DiagonalScalesByInverseRoot) {
  Vector a(1);
  a << 4.0;
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(1));
  RandomStream rng(6);
  RandomStream replay(6);
  Vector draw = t.exact_sample(rng);
  Vector xi = replay.normal_vector(1);
  EXPECT_NEAR(draw[0], 0.5 * xi[0], 1e-15);
}

TEST(ExactSample, MomentConvergence) {
  // 1e5 draws from N(0, diag(1, 1/4)): covariance within 3 standard errors.
  const int n = 100000;
  for (bool dense : {false, true}) {
    Vector a(2);
    a << 1.0, 4.0;
    SymmetricOperator prec =
        dense ? SymmetricOperator::from_dense(Matrix(a.asDiagonal()))
              : SymmetricOperator::from_diagonal(a);
    GaussianTarget t(prec, Vector::Zero(2));
    RandomStream rng(dense ? 91 : 92);
    Vector mean = Vector::Zero(2);
    Matrix second = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      Vector x = t.exact_sample(rng);
      mean += x;
      second += x * x.transpose();
    }
    mean /= n;
    Matrix cov = second / n - mean * mean.transpose();
    // SE of a variance estimate is var * sqrt(2/n).
    EXPECT_NEAR(cov(0, 0), 1.0, 3.0 * std::sqrt(2.0 / n) * 1.0);
    EXPECT_NEAR(cov(1, 1), 0.25, 3.0 * std::sqrt(2.0 / n) * 0.25);
    EXPECT_NEAR(cov(0, 1), 0.0, 3.0 * std::sqrt(0.25 / n));
    EXPECT_NEAR(mean[0], 0.0, 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  RandomStream rng(37);
  for (bool dense : {false, true}) {
    const Index d = 4;
    SymmetricOperator prec =
        dense ? SymmetricOperator::from_dense(random_spd(rng, d))
              : SymmetricOperator::from_diagonal(
                    (rng.normal_vector(d).array().abs() + 0.5).matrix());
    Vector b = rng.normal_vector(d);
    GaussianTarget t(prec, b);
    Vector x = rng.normal_vector(d);
    Vector grad = t.gradient(x);
    const double step = 1e-5;
    for (Index i = 0; i < d; ++i) {
      Vector xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      double fd =
          (t.log_density_unnorm(xp) - t.log_density_unnorm(xm)) / (2 * step);
      EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(grad[i])));
    }
  }
}

TEST(GaussianTarget, MeanSolvesShift) {
  RandomStream rng(41);
  Matrix a = random_spd(rng, 5);
  Vector b = rng.normal_vector(5);
  GaussianTarget t(SymmetricOperator::from_dense(a), b);
  EXPECT_LE((a * t.mean() - b).norm(), 1e-9 * (a.norm() * t.mean().norm() + b.norm()));
}

TEST(GaussianTarget, RejectsIndefinitePrecision) {
  Matrix m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianTarget(SymmetricOperator::from_dense(m), Vector::Zero(2)),
               NotPositiveDefinite);
}

TEST(GaussianTarget, LargeDiagonalDimension) {
  // Diagonal targets admit large d; this stays cheap.
  const Index d = 1000000;
  Vector a = Vector::Constant(d, 2.0);
  GaussianTarget t(SymmetricOperator::from_diagonal(a), Vector::Zero(d));
  RandomStream rng(43);
  Vector x = t.exact_sample(rng);
  EXPECT_EQ(x.size(), d);
  double var = x.squaredNorm() / d;
  EXPECT_NEAR(var, 0.5, 5.0 * 0.5 * std::sqrt(2.0 / d));
}

TEST(LogDensityContract, NonFiniteSurfacesAsError) {
  LogDensity bad([](const Vector& x) { return std::log(x[0]); }, nullptr);
  Vector neg(1);
  neg << -1.0;
  EXPECT_THROW(bad(neg), EvaluationFailure);
  LogDensity thrower(
      [](const Vector&) -> double { throw std::runtime_error("boom"); },
      nullptr);
  EXPECT_THROW(thrower(neg), EvaluationFailure);
}

TEST(LogDensityContract, FromTargetMatches) {
  RandomStream rng(47);
  Matrix a = random_spd(rng, 3);
  Vector b = rng.normal_vector(3);
  GaussianTarget t(SymmetricOperator::from_dense(a), b);
  LogDensity ld = LogDensity::from_target(t);
  Vector x = rng.normal_vector(3);
  EXPECT_DOUBLE_EQ(ld(x), t.log_density_unnorm(x));
  EXPECT_TRUE(ld.has_gradient());
  EXPECT_LE((ld.gradient(x) - t.gradient(x)).norm(), 1e-15);
}
