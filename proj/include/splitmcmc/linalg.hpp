// Dense and diagonal symmetric linear algebra: operators, Cholesky and
// spectral factorizations, solves, spectral radius.  Dense paths use Eigen;
// diagonal layouts are elementwise and scale to large dimension.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "splitmcmc/errors.hpp"
#include "splitmcmc/numerics.hpp"

namespace splitmcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace detail {

inline void check_dense_cap(Index d) {
  if (d > numerics().dense_cap) {
    throw DimensionMismatch("dense representation refused above dimension cap");
  }
}

inline double relative_asymmetry(const Matrix& x) {
  double scale = x.norm();
  if (scale == 0.0) return 0.0;
  return (x - x.transpose()).norm() / scale;
}

}  // namespace detail

// General d x d linear operator in dense or diagonal layout.  Immutable.
class SquareOperator {
 public:
  static SquareOperator from_dense(Matrix m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("matrix is not square");
    detail::check_dense_cap(m.rows());
    return SquareOperator(std::move(m));
  }
  static SquareOperator from_diagonal(Vector d) {
    return SquareOperator(std::move(d));
  }
  static SquareOperator identity(Index d) {
    Vector ones = Vector::Ones(d);
    return SquareOperator(std::move(ones));
  }
  static SquareOperator zero(Index d) {
    Vector zeros = Vector::Zero(d);
    return SquareOperator(std::move(zeros));
  }

  Index dim() const { return diagonal_ ? diag_.size() : mat_.rows(); }
  bool is_diagonal() const { return diagonal_; }

  const Vector& diagonal_values() const { return diag_; }
  const Matrix& dense_values() const { return mat_; }

  Matrix to_dense() const {
    if (!diagonal_) return mat_;
    detail::check_dense_cap(dim());
    return Matrix(diag_.asDiagonal());
  }

  Vector apply(const Eigen::Ref<const Vector>& v) const {
    if (v.size() != dim()) throw DimensionMismatch("operator/vector size");
    if (diagonal_) return diag_.cwiseProduct(v);
    return mat_ * v;
  }

  SquareOperator transpose() const {
    if (diagonal_) return *this;
    return from_dense(mat_.transpose());
  }

  double frobenius_norm() const {
    return diagonal_ ? diag_.norm() : mat_.norm();
  }

  bool is_symmetric(double rtol) const {
    if (diagonal_) return true;
    return detail::relative_asymmetry(mat_) <= rtol;
  }

 private:
  explicit SquareOperator(Matrix m) : diagonal_(false), mat_(std::move(m)) {}
  explicit SquareOperator(Vector d) : diagonal_(true), diag_(std::move(d)) {}

  bool diagonal_;
  Vector diag_;
  Matrix mat_;
};

// Pointwise algebra on square operators.  Diagonal layout is preserved when
// both operands are diagonal; otherwise the result is dense (cap applies).
inline SquareOperator compose(const SquareOperator& a, const SquareOperator& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("compose: size mismatch");
  if (a.is_diagonal() && b.is_diagonal()) {
    return SquareOperator::from_diagonal(
        a.diagonal_values().cwiseProduct(b.diagonal_values()));
  }
  return SquareOperator::from_dense(a.to_dense() * b.to_dense());
}

inline SquareOperator add(const SquareOperator& a, const SquareOperator& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("add: size mismatch");
  if (a.is_diagonal() && b.is_diagonal()) {
    return SquareOperator::from_diagonal(a.diagonal_values() +
                                         b.diagonal_values());
  }
  return SquareOperator::from_dense(a.to_dense() + b.to_dense());
}

inline SquareOperator subtract(const SquareOperator& a,
                               const SquareOperator& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("subtract: size mismatch");
  if (a.is_diagonal() && b.is_diagonal()) {
    return SquareOperator::from_diagonal(a.diagonal_values() -
                                         b.diagonal_values());
  }
  return SquareOperator::from_dense(a.to_dense() - b.to_dense());
}

inline SquareOperator scaled(const SquareOperator& a, double c) {
  if (a.is_diagonal()) {
    return SquareOperator::from_diagonal(c * a.diagonal_values());
  }
  return SquareOperator::from_dense(c * a.dense_values());
}

// I + c * A
inline SquareOperator identity_plus(const SquareOperator& a, double c) {
  if (a.is_diagonal()) {
    return SquareOperator::from_diagonal(
        (1.0 + c * a.diagonal_values().array()).matrix());
  }
  Matrix m = c * a.dense_values();
  m.diagonal().array() += 1.0;
  return SquareOperator::from_dense(std::move(m));
}

// Symmetric operator.  Dense inputs are symmetrized at construction and
// rejected if the correction is too large.
class SymmetricOperator {
 public:
  static SymmetricOperator from_dense(Matrix m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("matrix is not square");
    detail::check_dense_cap(m.rows());
    double asym = detail::relative_asymmetry(m);
    // Absolute asymmetry relative to scale; anything above the rejection
    // threshold is a caller bug, not roundoff.
    if (asym > numerics().sym_reject_tol) {
      throw DimensionMismatch("matrix is not symmetric within tolerance");
    }
    Matrix sym = 0.5 * (m + m.transpose());
    return SymmetricOperator(std::move(sym));
  }
  static SymmetricOperator from_diagonal(Vector d) {
    return SymmetricOperator(std::move(d));
  }
  static SymmetricOperator identity(Index d) {
    Vector ones = Vector::Ones(d);
    return SymmetricOperator(std::move(ones));
  }
  // Adopts a SquareOperator known (or required) to be symmetric.
  static SymmetricOperator from_square(const SquareOperator& s) {
    if (s.is_diagonal()) return from_diagonal(s.diagonal_values());
    return from_dense(s.dense_values());
  }

  Index dim() const { return diagonal_ ? diag_.size() : mat_.rows(); }
  bool is_diagonal() const { return diagonal_; }
  const Vector& diagonal_values() const { return diag_; }
  const Matrix& dense_values() const { return mat_; }

  Matrix to_dense() const {
    if (!diagonal_) return mat_;
    detail::check_dense_cap(dim());
    return Matrix(diag_.asDiagonal());
  }

  SquareOperator as_square() const {
    if (diagonal_) return SquareOperator::from_diagonal(diag_);
    return SquareOperator::from_dense(mat_);
  }

  Vector apply(const Eigen::Ref<const Vector>& v) const {
    if (v.size() != dim()) throw DimensionMismatch("operator/vector size");
    if (diagonal_) return diag_.cwiseProduct(v);
    return mat_ * v;
  }

  // x^T S x
  double quadratic_form(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != dim()) throw DimensionMismatch("operator/vector size");
    if (diagonal_) return diag_.dot(x.cwiseProduct(x));
    return x.dot(mat_ * x);
  }

  double frobenius_norm() const {
    return diagonal_ ? diag_.norm() : mat_.norm();
  }

 private:
  explicit SymmetricOperator(Matrix m) : diagonal_(false), mat_(std::move(m)) {}
  explicit SymmetricOperator(Vector d) : diagonal_(true), diag_(std::move(d)) {}

  bool diagonal_;
  Vector diag_;
  Matrix mat_;
};

// Cholesky factor of an SPD operator: lower-triangular L with L L^T = S, or
// the elementwise square root in the diagonal case.
class SpdFactorization {
 public:
  Index dim() const { return diagonal_ ? sqrt_.size() : lower_.rows(); }
  bool is_diagonal() const { return diagonal_; }
  const Vector& sqrt_values() const { return sqrt_; }
  const Matrix& lower() const { return lower_; }

  // L L^T
  Matrix reconstruct() const {
    if (diagonal_) {
      detail::check_dense_cap(dim());
      return Matrix(sqrt_.cwiseProduct(sqrt_).asDiagonal());
    }
    return lower_ * lower_.transpose();
  }

  // Solve (L L^T) x = rhs.
  Vector solve(const Eigen::Ref<const Vector>& rhs) const {
    if (rhs.size() != dim()) throw DimensionMismatch("factor/vector size");
    if (diagonal_) {
      return rhs.cwiseQuotient(sqrt_.cwiseProduct(sqrt_));
    }
    Vector y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  Matrix solve_matrix(const Eigen::Ref<const Matrix>& rhs) const {
    if (rhs.rows() != dim()) throw DimensionMismatch("factor/matrix size");
    if (diagonal_) {
      return sqrt_.cwiseProduct(sqrt_).cwiseInverse().asDiagonal() * rhs;
    }
    Matrix y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  // L xi: maps a standard normal xi to a draw with covariance S.
  Vector apply_factor(const Eigen::Ref<const Vector>& xi) const {
    if (xi.size() != dim()) throw DimensionMismatch("factor/vector size");
    if (diagonal_) return sqrt_.cwiseProduct(xi);
    return lower_.triangularView<Eigen::Lower>() * xi;
  }

  // L^-T xi: maps a standard normal xi to a draw with covariance S^-1
  // (precision-form sampling).
  Vector solve_transposed_factor(const Eigen::Ref<const Vector>& xi) const {
    if (xi.size() != dim()) throw DimensionMismatch("factor/vector size");
    if (diagonal_) return xi.cwiseQuotient(sqrt_);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(xi);
  }

  // -1/2 r^T S^-1 r, the exponent of a mean-zero Gaussian with covariance S.
  double half_negative_mahalanobis(const Eigen::Ref<const Vector>& r) const {
    if (diagonal_) {
      return -0.5 * r.cwiseQuotient(sqrt_).squaredNorm();
    }
    Vector y = lower_.triangularView<Eigen::Lower>().solve(r);
    return -0.5 * y.squaredNorm();
  }

  double log_det() const {
    if (diagonal_) return 2.0 * sqrt_.array().log().sum();
    return 2.0 * lower_.diagonal().array().log().sum();
  }

 private:
  friend SpdFactorization spd_factorize(const SymmetricOperator&);
  explicit SpdFactorization(Matrix l) : diagonal_(false), lower_(std::move(l)) {}
  explicit SpdFactorization(Vector s) : diagonal_(true), sqrt_(std::move(s)) {}

  bool diagonal_;
  Vector sqrt_;
  Matrix lower_;
};

inline SpdFactorization spd_factorize(const SymmetricOperator& op) {
  const Index d = op.dim();
  const double eps = std::numeric_limits<double>::epsilon();
  if (op.is_diagonal()) {
    const Vector& v = op.diagonal_values();
    double pivot_floor = static_cast<double>(d) * eps * v.cwiseAbs().maxCoeff();
    if ((v.array() <= pivot_floor).any()) {
      throw NotPositiveDefinite("diagonal entry at or below pivot threshold");
    }
    Vector sqrt_vals = v.cwiseSqrt();
    return SpdFactorization(std::move(sqrt_vals));
  }
  const Matrix& m = op.dense_values();
  Eigen::LLT<Matrix> llt(m);
  double pivot_floor =
      static_cast<double>(d) * eps * m.diagonal().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("Cholesky factorization failed");
  }
  Matrix lower = llt.matrixL();
  for (Index i = 0; i < d; ++i) {
    double pivot = lower(i, i) * lower(i, i);
    if (!(pivot > pivot_floor)) {
      throw NotPositiveDefinite("pivot at or below threshold");
    }
  }
  return SpdFactorization(std::move(lower));
}

// Eigen-decomposition of a symmetric operator.  Eigenvalues ascending; for a
// diagonal operator the eigenvector matrix is the sorting permutation (never
// materialized dense unless asked).
class SpectralDecomposition {
 public:
  const Vector& eigenvalues() const { return eigenvalues_; }
  bool is_diagonal_source() const { return diagonal_; }
  Index dim() const { return eigenvalues_.size(); }

  // Q^T v (coordinates of v in the eigenbasis).
  Vector apply_qt(const Eigen::Ref<const Vector>& v) const {
    if (v.size() != dim()) throw DimensionMismatch("decomposition/vector size");
    if (!diagonal_) return q_.transpose() * v;
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) out[i] = v[perm_[i]];
    return out;
  }

  // Q v
  Vector apply_q(const Eigen::Ref<const Vector>& v) const {
    if (v.size() != dim()) throw DimensionMismatch("decomposition/vector size");
    if (!diagonal_) return q_ * v;
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) out[perm_[i]] = v[i];
    return out;
  }

  // i-th normalized eigenvector.
  Vector eigenvector(Index i) const {
    if (i < 0 || i >= dim()) throw DimensionMismatch("eigenvector index");
    if (!diagonal_) return q_.col(i);
    Vector e = Vector::Zero(dim());
    e[perm_[i]] = 1.0;
    return e;
  }

  Matrix q_dense() const {
    if (!diagonal_) return q_;
    detail::check_dense_cap(dim());
    Matrix q = Matrix::Zero(dim(), dim());
    for (Index i = 0; i < dim(); ++i) q(perm_[i], i) = 1.0;
    return q;
  }

 private:
  friend SpectralDecomposition spectral_decompose(const SymmetricOperator&);
  SpectralDecomposition() = default;

  bool diagonal_ = false;
  Vector eigenvalues_;
  Matrix q_;
  std::vector<Index> perm_;
};

inline SpectralDecomposition spectral_decompose(const SymmetricOperator& op) {
  SpectralDecomposition out;
  if (op.is_diagonal()) {
    const Vector& v = op.diagonal_values();
    out.diagonal_ = true;
    out.perm_.resize(v.size());
    std::iota(out.perm_.begin(), out.perm_.end(), Index{0});
    std::stable_sort(out.perm_.begin(), out.perm_.end(),
                     [&](Index a, Index b) { return v[a] < v[b]; });
    out.eigenvalues_.resize(v.size());
    for (Index i = 0; i < v.size(); ++i) out.eigenvalues_[i] = v[out.perm_[i]];
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(op.dense_values());
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("symmetric eigensolver did not converge");
  }
  out.eigenvalues_ = solver.eigenvalues();
  out.q_ = solver.eigenvectors();
  return out;
}

// Solve op * x = rhs for a (possibly indefinite) symmetric operator.
inline Vector solve(const SymmetricOperator& op,
                    const Eigen::Ref<const Vector>& rhs) {
  if (rhs.size() != op.dim()) throw DimensionMismatch("solve: size mismatch");
  if (op.is_diagonal()) {
    const Vector& d = op.diagonal_values();
    double floor = d.cwiseAbs().maxCoeff() *
                   std::numeric_limits<double>::epsilon() * op.dim();
    if ((d.cwiseAbs().array() <= floor).any()) {
      throw Singular("diagonal solve: zero entry");
    }
    return rhs.cwiseQuotient(d);
  }
  Eigen::FullPivLU<Matrix> lu(op.dense_values());
  if (!lu.isInvertible()) throw Singular("dense solve: singular operator");
  return lu.solve(rhs);
}

inline Vector solve(const SpdFactorization& f,
                    const Eigen::Ref<const Vector>& rhs) {
  return f.solve(rhs);
}

// General square solves, used by the splitting conversions.
inline Vector solve_square(const SquareOperator& op,
                           const Eigen::Ref<const Vector>& rhs) {
  if (rhs.size() != op.dim()) throw DimensionMismatch("solve: size mismatch");
  if (op.is_diagonal()) {
    const Vector& d = op.diagonal_values();
    double floor = d.cwiseAbs().maxCoeff() *
                   std::numeric_limits<double>::epsilon() * op.dim();
    if (d.size() > 0 && (d.cwiseAbs().array() <= floor).any()) {
      throw Singular("diagonal solve: zero entry");
    }
    return rhs.cwiseQuotient(d);
  }
  Eigen::FullPivLU<Matrix> lu(op.dense_values());
  if (!lu.isInvertible()) throw Singular("dense solve: singular operator");
  return lu.solve(rhs);
}

inline Matrix solve_square_matrix(const SquareOperator& op,
                                  const Eigen::Ref<const Matrix>& rhs) {
  if (rhs.rows() != op.dim()) throw DimensionMismatch("solve: size mismatch");
  if (op.is_diagonal()) {
    const Vector& d = op.diagonal_values();
    double floor = d.cwiseAbs().maxCoeff() *
                   std::numeric_limits<double>::epsilon() * op.dim();
    if ((d.cwiseAbs().array() <= floor).any()) {
      throw Singular("diagonal solve: zero entry");
    }
    return d.cwiseInverse().asDiagonal() * rhs;
  }
  Eigen::FullPivLU<Matrix> lu(op.dense_values());
  if (!lu.isInvertible()) throw Singular("dense solve: singular operator");
  return lu.solve(rhs);
}

namespace detail {

// Power iteration with a 2-dimensional Krylov refinement so that dominant
// complex-conjugate pairs converge too.
inline double power_iteration_radius(const Matrix& g) {
  const Index d = g.rows();
  if (g.norm() == 0.0) return 0.0;
  Vector x = Vector::Ones(d).normalized();
  double estimate = 0.0;
  const double tol = numerics().spectral_radius_tol;
  const std::int64_t cap = numerics().spectral_radius_max_iter;
  for (std::int64_t k = 0; k < cap; ++k) {
    Vector y = g * x;
    double ny = y.norm();
    if (ny == 0.0) return 0.0;
    // Project G onto span{x, y} and take the largest eigenvalue modulus of
    // the 2x2 projected problem.
    Vector q1 = x;
    Vector q2 = y - q1.dot(y) * q1;
    double nq2 = q2.norm();
    double rho;
    if (nq2 < 1e-300) {
      rho = std::abs(q1.dot(y));
    } else {
      q2 /= nq2;
      Eigen::Matrix2d h;
      Vector gq1 = y;  // g * q1
      Vector gq2 = g * q2;
      h << q1.dot(gq1), q1.dot(gq2), q2.dot(gq1), q2.dot(gq2);
      Eigen::EigenSolver<Eigen::Matrix2d> es(h, false);
      rho = es.eigenvalues().cwiseAbs().maxCoeff();
    }
    if (k > 0 && std::abs(rho - estimate) <=
                     tol * std::max(1.0, std::abs(rho))) {
      return rho;
    }
    estimate = rho;
    x = y / ny;
  }
  throw ConvergenceFailure("spectral radius power iteration hit cap");
}

}  // namespace detail

// Largest eigenvalue modulus of a general square matrix.
inline double spectral_radius(const SquareOperator& g) {
  if (g.is_diagonal()) {
    if (g.dim() == 0) return 0.0;
    return g.diagonal_values().cwiseAbs().maxCoeff();
  }
  if (!g.dense_values().allFinite()) {
    throw DimensionMismatch("spectral radius of non-finite matrix");
  }
  if (g.dim() <= numerics().power_iteration_threshold) {
    Eigen::EigenSolver<Matrix> solver(g.dense_values(), false);
    if (solver.info() != Eigen::Success) {
      throw ConvergenceFailure("general eigensolver did not converge");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
  }
  return detail::power_iteration_radius(g.dense_values());
}

inline double spectral_radius(const Matrix& g) {
  return spectral_radius(SquareOperator::from_dense(g));
}

// Extreme eigenvalues of a symmetric operator.
inline double lambda_max(const SymmetricOperator& op) {
  if (op.is_diagonal()) return op.diagonal_values().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(op.dense_values(),
                                               Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("symmetric eigensolver did not converge");
  }
  return solver.eigenvalues().maxCoeff();
}

inline double lambda_min(const SymmetricOperator& op) {
  if (op.is_diagonal()) return op.diagonal_values().minCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(op.dense_values(),
                                               Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("symmetric eigensolver did not converge");
  }
  return solver.eigenvalues().minCoeff();
}

}  // namespace splitmcmc
