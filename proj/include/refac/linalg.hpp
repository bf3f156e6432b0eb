#pragma once

#include <Eigen/Dense>
#include <string_view>

namespace refac {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// Largest tolerated ratio of extreme eigenvalues before a symmetric
/// matrix is treated as singular.
inline constexpr double kConditionLimit = 1e12;

/// Eigenvalues above -kPsdClamp are clamped to zero in PSD square roots.
inline constexpr double kPsdClamp = 1e-10;

/// Inverse, square root and inverse square root of a symmetric positive
/// definite matrix, all from one eigendecomposition.
struct SpdFactor {
  MatrixXd matrix;
  MatrixXd inverse;
  MatrixXd sqrt;
  MatrixXd inv_sqrt;
  double condition = 1.0;
};

/// Throws NumericalError naming `what` when the matrix is not positive
/// definite or its condition number exceeds kConditionLimit.
SpdFactor factor_spd(const MatrixXd& a, std::string_view what);

/// Symmetric PSD square root; eigenvalues in [-kPsdClamp, 0) are clamped,
/// anything more negative throws NumericalError("... not PSD").
MatrixXd psd_sqrt(const MatrixXd& a, std::string_view what);

MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

/// Finite-population covariance (n - 1 divisor) of the rows of `x`.
MatrixXd finite_population_covariance(const MatrixXd& x);

/// Cross covariance (n - 1 divisor) between the rows of `a` and `b`.
MatrixXd finite_population_cross_covariance(const MatrixXd& a, const MatrixXd& b);

MatrixXd symmetrize(const MatrixXd& a);

/// Smallest eigenvalue of the symmetric part of `a`.
double min_eigenvalue(const MatrixXd& a);

/// SPD matrix with Kronecker structure left (x) right. Inverse and inverse
/// square root are kept factor-wise; the dense LF x LF inverse is never
/// formed unless asked for.
class KroneckerSpd {
 public:
  KroneckerSpd(const MatrixXd& left, const MatrixXd& right, std::string_view what);

  Eigen::Index size() const { return left_.matrix.rows() * right_.matrix.rows(); }
  const SpdFactor& left() const { return left_; }
  const SpdFactor& right() const { return right_; }

  /// v' (left (x) right)^{-1} v for v stacked left-index-major.
  double quadratic_form(const VectorXd& v) const;

  /// Same form with v reshaped as a (left dim) x (right dim) matrix:
  /// trace(left^{-1} T right^{-1} T').
  double quadratic_form_matrix(const MatrixXd& t) const;

  MatrixXd dense() const;
  MatrixXd inverse_dense() const;
  MatrixXd inv_sqrt_dense() const;

 private:
  SpdFactor left_;
  SpdFactor right_;
};

/// Row-major flattening of a matrix into a vector (row index major).
VectorXd stack_rows(const MatrixXd& m);

/// Inverse of stack_rows.
MatrixXd unstack_rows(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);

}  // namespace refac
