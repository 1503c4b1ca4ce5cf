// Gaussian targets in precision form N(A^-1 b, A^-1): log densities,
// gradients, exact sampling.  Diagonal targets admit arbitrary dimension;
// dense targets obey the dense cap.

#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "splitmcmc/linalg.hpp"
#include "splitmcmc/random.hpp"

namespace splitmcmc {

class GaussianTarget {
 public:
  GaussianTarget(SymmetricOperator precision, Vector shift)
      : precision_(std::move(precision)),
        shift_(std::move(shift)),
        factor_(spd_factorize(precision_)) {
    if (shift_.size() != precision_.dim()) {
      throw DimensionMismatch("precision/shift size mismatch");
    }
    mean_ = factor_.solve(shift_);
    double resid = (precision_.apply(mean_) - shift_).norm();
    double scale = precision_.frobenius_norm() * mean_.norm() + shift_.norm();
    if (resid > numerics().mean_residual_rtol * std::max(scale, 1.0)) {
      throw ConvergenceFailure("mean solve residual too large");
    }
  }

  Index dim() const { return precision_.dim(); }
  const SymmetricOperator& precision() const { return precision_; }
  const Vector& shift() const { return shift_; }
  const Vector& mean() const { return mean_; }
  const SpdFactorization& precision_factor() const { return factor_; }

  // -1/2 x^T A x + b^T x (unnormalized).
  double log_density_unnorm(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != dim()) throw DimensionMismatch("target/vector size");
    return -0.5 * precision_.quadratic_form(x) + shift_.dot(x);
  }

  // b - A x
  Vector gradient(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != dim()) throw DimensionMismatch("target/vector size");
    return shift_ - precision_.apply(x);
  }

  // m + L^-T xi with L L^T = A; exact draw from N(m, A^-1).
  Vector exact_sample(RandomStream& rng) const {
    Vector xi = rng.normal_vector(dim());
    return mean_ + factor_.solve_transposed_factor(xi);
  }

  // diag(A^-1), for moment checks.
  Vector covariance_diagonal() const {
    if (precision_.is_diagonal()) {
      return precision_.diagonal_values().cwiseInverse();
    }
    Matrix inv = factor_.solve_matrix(Matrix::Identity(dim(), dim()));
    return inv.diagonal();
  }

  Matrix covariance_dense() const {
    Matrix inv = factor_.solve_matrix(Matrix::Identity(dim(), dim()));
    return 0.5 * (inv + inv.transpose());
  }

 private:
  SymmetricOperator precision_;
  Vector shift_;
  SpdFactorization factor_;
  Vector mean_;
};

// Callable contract for a generic (possibly non-Gaussian) unnormalized log
// density.  Evaluations must be finite on finite inputs; anything else
// surfaces as EvaluationFailure.
class LogDensity {
 public:
  using DensityFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;

  explicit LogDensity(DensityFn f, GradientFn grad = nullptr)
      : f_(std::move(f)), grad_(std::move(grad)) {}

  static LogDensity from_target(const GaussianTarget& t) {
    return LogDensity(
        [&t](const Vector& x) { return t.log_density_unnorm(x); },
        [&t](const Vector& x) { return t.gradient(x); });
  }

  bool has_gradient() const { return static_cast<bool>(grad_); }

  double operator()(const Vector& x) const {
    double v;
    try {
      v = f_(x);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw EvaluationFailure(std::string("log density threw: ") + e.what());
    }
    if (!std::isfinite(v)) {
      throw EvaluationFailure("log density returned a non-finite value");
    }
    return v;
  }

  Vector gradient(const Vector& x) const {
    if (!grad_) throw EvaluationFailure("log density has no gradient");
    return grad_(x);
  }

 private:
  DensityFn f_;
  GradientFn grad_;
};

}  // namespace splitmcmc
