#pragma once

#include <cmath>
#include <memory>
#include <string>

#include <Eigen/CholmodSupport>
#include <Eigen/Sparse>

#include "carleman/error.hpp"

namespace carleman {

namespace detail {

template <typename Mat>
class CholmodFactor : public Eigen::CholmodSupernodalLLT<Mat, Eigen::Lower> {
  using Base = Eigen::CholmodBase<Mat, Eigen::Lower, Eigen::CholmodSupernodalLLT<Mat, Eigen::Lower>>;

 public:
  /// Reciprocal condition estimate of the factored matrix (CHOLMOD's diag(L) ratio, squared).
  double rcond() const { return cholmod_rcond(this->Base::m_cholmodFactor, &this->Base::m_cholmod); }
};

}  // namespace detail

/// Solves  min_x ||A x - b||^2  through the normal equations A^H A x = A^H b,
/// factored once with a supernodal sparse Cholesky and reusable for many
/// right-hand sides. Regularization rows are expected to be stacked into A.
template <typename Scalar>
class NormalEquationsSolver {
 public:
  using Matrix = Eigen::SparseMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// Factorizations whose reciprocal condition estimate falls below this are rejected.
  static constexpr double min_rcond = 1e-18;

  explicit NormalEquationsSolver(Matrix A, std::string stage = "least-squares")
      : A_(std::move(A)), stage_(std::move(stage)), factor_(std::make_unique<detail::CholmodFactor<Matrix>>()) {
    Matrix normal = Matrix(A_.adjoint()) * A_;
    normal.makeCompressed();
    factor_->compute(normal);
    if (factor_->info() != Eigen::Success)
      throw NumericalError(stage_, "normal equations are not positive definite (regularization too small)");
    rcond_ = factor_->rcond();
    if (!(rcond_ > min_rcond))
      throw NumericalError(stage_, "normal equations numerically singular, condition estimate " +
                                       std::to_string(1.0 / rcond_));
  }

  Vector solve(const Vector& b) const {
    if (b.size() != A_.rows()) throw ConfigError("right-hand side does not match operator rows");
    const Vector rhs = A_.adjoint() * b;
    Vector x = factor_->solve(rhs);
    if (factor_->info() != Eigen::Success || !x.allFinite())
      throw NumericalError(stage_, "normal-equation solve failed");
    return x;
  }

  double residual_norm(const Vector& x, const Vector& b) const { return (A_ * x - b).norm(); }
  double condition_estimate() const { return 1.0 / rcond_; }
  const Matrix& matrix() const { return A_; }

 private:
  Matrix A_;
  std::string stage_;
  std::unique_ptr<detail::CholmodFactor<Matrix>> factor_;
  double rcond_ = 0.0;
};

template <typename Scalar>
struct LeastSquaresSolution {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  double residual_norm = 0.0;
  double condition_estimate = 0.0;
};

/// Unique minimizer of ||A x - b||^2 + ||R x||^2 (R may be empty).
template <typename Scalar>
LeastSquaresSolution<Scalar> solve_weighted_least_squares(const Eigen::SparseMatrix<Scalar>& rows,
                                                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& rhs,
                                                          const Eigen::SparseMatrix<Scalar>& regularizer = {}) {
  using Matrix = Eigen::SparseMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Matrix stacked = rows;
  Vector b = rhs;
  if (regularizer.rows() > 0) {
    if (regularizer.cols() != rows.cols()) throw ConfigError("regularizer columns do not match operator");
    stacked.resize(rows.rows() + regularizer.rows(), rows.cols());
    std::vector<Eigen::Triplet<Scalar>> trip;
    trip.reserve(static_cast<std::size_t>(rows.nonZeros() + regularizer.nonZeros()));
    for (int c = 0; c < rows.outerSize(); ++c)
      for (typename Matrix::InnerIterator it(rows, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    for (int c = 0; c < regularizer.outerSize(); ++c)
      for (typename Matrix::InnerIterator it(regularizer, c); it; ++it)
        trip.emplace_back(rows.rows() + it.row(), it.col(), it.value());
    stacked.setFromTriplets(trip.begin(), trip.end());
    b = Vector::Zero(stacked.rows());
    b.head(rhs.size()) = rhs;
  }
  const NormalEquationsSolver<Scalar> solver(stacked);
  LeastSquaresSolution<Scalar> out;
  out.x = solver.solve(b);
  out.residual_norm = solver.residual_norm(out.x, b);
  out.condition_estimate = solver.condition_estimate();
  return out;
}

}  // namespace carleman
