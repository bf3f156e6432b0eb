#include "refac/inference.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <string>

#include "refac/chisq.hpp"
#include "refac/errors.hpp"

namespace refac {

bool ConfidenceSet::contains(const VectorXd& v) const {
  const VectorXd d = v - center;
  return d.dot(shape.ldlt().solve(d)) <= threshold;
}

double ConfidenceSet::log_volume() const {
  const auto p = static_cast<double>(center.size());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(shape, Eigen::EigenvaluesOnly);
  return 0.5 * eig.eigenvalues().array().log().sum() + 0.5 * p * std::log(threshold);
}

Analysis analyze(const VectorXd& y, const Assignment& z, const BalanceEvaluator& design) {
  const auto& s = design.structure();
  validate_assignment(z, design.sizes());
  Analysis a;
  a.tau_hat = effect_estimates(y, z, s);
  const SampleMoments m = sample_moments(y, design.covariates(), z, s.Q);
  a.neyman = neyman_covariance(m, s);
  a.vhat_perp = vhat_tautau_perp(m, s);
  if (design.layout().crfe) {
    a.law.base_cov = a.neyman;
    a.shape = a.neyman;
    return a;
  }
  a.coefficients = projection_coefficient_estimates(m, design);
  a.law.base_cov = a.vhat_perp;
  a.shape = a.vhat_perp;
  const auto& layout = design.layout();
  for (int j = 0; j < layout.cells(); ++j) {
    a.law.components.push_back({a.coefficients[j], layout.dims[j], layout.a[j]});
  }
  return a;
}

void check_full_row_rank(const MatrixXd& C) {
  if (C.rows() == 0 || C.rows() > C.cols()) {
    throw ValidationError("contrast matrix must have between 1 and F rows");
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(C.transpose());
  qr.setThreshold(1e-10);
  if (qr.rank() < C.rows()) throw ValidationError("contrast matrix C is not of full row rank");
}

namespace {

void check_contrast_width(const MatrixXd& C, Eigen::Index F) {
  if (C.cols() != F) {
    throw ValidationError("contrast matrix has " + std::to_string(C.cols()) + " columns but there are " +
                          std::to_string(F) + " effects");
  }
}

}  // namespace

MatrixXd covariance_estimate(const MatrixXd& C, const AsymptoticLaw& law) {
  check_contrast_width(C, law.covariance().rows());
  check_full_row_rank(C);
  return symmetrize(C * law.covariance() * C.transpose());
}

std::vector<ConfidenceSet> confidence_sets(const Analysis& a, const MatrixXd& C,
                                           const std::vector<double>& alphas, const Rng& rng,
                                           Eigen::Index draws, int workers) {
  check_contrast_width(C, a.tau_hat.size());
  check_full_row_rank(C);
  const MatrixXd shape = symmetrize(C * a.shape * C.transpose());
  factor_spd(shape, "C V_hat C' (supply a lower-dimensional contrast matrix)");
  const auto thresholds = quantile_thresholds(a.law, C, shape, alphas, rng, draws, workers);
  std::vector<ConfidenceSet> out;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    ConfidenceSet cs;
    cs.center = C * a.tau_hat;
    cs.shape = shape;
    cs.threshold = thresholds[i];
    cs.alpha = alphas[i];
    cs.draws = draws;
    cs.seed = rng.seed();
    out.push_back(std::move(cs));
  }
  return out;
}

ConfidenceSet confidence_set(const Analysis& a, const MatrixXd& C, double alpha, const Rng& rng,
                             Eigen::Index draws, int workers) {
  return confidence_sets(a, C, {alpha}, rng, draws, workers).front();
}

std::vector<EffectInterval> effect_intervals(const Analysis& a, double alpha, const Rng& rng,
                                             Eigen::Index draws, int workers) {
  if (draws < kMinQuantileDraws) {
    throw ValidationError("quantile thresholds need at least " + std::to_string(kMinQuantileDraws) +
                          " draws");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const bool gaussian = a.law.components.empty() &&
                        (a.shape - a.law.base_cov).norm() <= 1e-12 * std::max(1.0, a.shape.norm());
  const MatrixXd phi = gaussian ? MatrixXd() : simulate_law(a.law, rng, draws, workers);
  const double chisq1 = chisq::quantile(1.0, 1.0 - alpha);
  std::vector<EffectInterval> out;
  for (int f = 0; f < a.law.F(); ++f) {
    const double var = a.shape(f, f);
    if (var < 0.0 || std::isnan(var)) {
      throw NumericalError("estimated variance of effect " + std::to_string(f + 1) + " is negative");
    }
    EffectInterval iv;
    iv.estimate = a.tau_hat(f);
    if (gaussian) {
      iv.threshold = chisq1;
    } else if (var > 0.0) {
      VectorXd forms = phi.col(f).array().square() / var;
      iv.threshold = empirical_quantile(forms, alpha);
    }
    // a zero variance estimate leaves a point interval
    const double half = var == 0.0 ? 0.0 : std::sqrt(iv.threshold * var);
    iv.lower = iv.estimate - half;
    iv.upper = iv.estimate + half;
    out.push_back(iv);
  }
  return out;
}

}  // namespace refac
