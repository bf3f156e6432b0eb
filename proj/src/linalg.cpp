#include "refac/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <unsupported/Eigen/KroneckerProduct>

#include "refac/errors.hpp"

namespace refac {

SpdFactor factor_spd(const MatrixXd& a, std::string_view what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw NumericalError(std::string(what) + ": expected a nonempty square matrix");
  }
  const MatrixXd sym = symmetrize(a);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": eigendecomposition failed");
  }
  const VectorXd& lambda = eig.eigenvalues();
  const double largest = lambda.maxCoeff();
  const double smallest = lambda.minCoeff();
  if (!(largest > 0.0) || !(smallest > 0.0) || largest / smallest > kConditionLimit) {
    throw NumericalError(std::string(what) + " is singular or ill-conditioned (eigenvalues " +
                         std::to_string(smallest) + " .. " + std::to_string(largest) + ")");
  }
  const MatrixXd& u = eig.eigenvectors();
  SpdFactor f;
  f.matrix = sym;
  f.inverse = u * lambda.cwiseInverse().asDiagonal() * u.transpose();
  f.sqrt = u * lambda.cwiseSqrt().asDiagonal() * u.transpose();
  f.inv_sqrt = u * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose();
  f.condition = largest / smallest;
  return f;
}

MatrixXd psd_sqrt(const MatrixXd& a, std::string_view what) {
  if (a.rows() == 0) return a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(a));
  if (eig.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": eigendecomposition failed");
  }
  VectorXd lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -kPsdClamp) {
    throw NumericalError(std::string(what) + " is not PSD (eigenvalue " +
                         std::to_string(lambda.minCoeff()) + ")");
  }
  lambda = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

MatrixXd finite_population_covariance(const MatrixXd& x) {
  return finite_population_cross_covariance(x, x);
}

MatrixXd finite_population_cross_covariance(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows()) throw ValidationError("covariance: row counts differ");
  if (a.rows() < 2) throw ValidationError("covariance needs at least two rows");
  const MatrixXd ca = a.rowwise() - a.colwise().mean();
  const MatrixXd cb = b.rowwise() - b.colwise().mean();
  return (ca.transpose() * cb) / static_cast<double>(a.rows() - 1);
}

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue(const MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(a), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

KroneckerSpd::KroneckerSpd(const MatrixXd& left, const MatrixXd& right, std::string_view what)
    : left_(factor_spd(left, std::string(what) + " (effect factor)")),
      right_(factor_spd(right, std::string(what) + " (covariate factor)")) {}

double KroneckerSpd::quadratic_form(const VectorXd& v) const {
  return quadratic_form_matrix(unstack_rows(v, left_.matrix.rows(), right_.matrix.rows()));
}

double KroneckerSpd::quadratic_form_matrix(const MatrixXd& t) const {
  // ||left^{-1/2} T right^{-1/2}||_F^2
  return (left_.inv_sqrt * t * right_.inv_sqrt).squaredNorm();
}

MatrixXd KroneckerSpd::dense() const { return kron(left_.matrix, right_.matrix); }

MatrixXd KroneckerSpd::inverse_dense() const { return kron(left_.inverse, right_.inverse); }

MatrixXd KroneckerSpd::inv_sqrt_dense() const { return kron(left_.inv_sqrt, right_.inv_sqrt); }

VectorXd stack_rows(const MatrixXd& m) {
  VectorXd v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(k++) = m(i, j);
  }
  return v;
}

MatrixXd unstack_rows(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw ValidationError("dimension mismatch in unstack_rows");
  MatrixXd m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v(k++);
  }
  return m;
}

}  // namespace refac
