#pragma once

#include <cstdint>
#include <vector>

#include "refac/asymptotics.hpp"
#include "refac/estimation.hpp"

namespace refac {

/// {v : (v - center)' shape^{-1} (v - center) <= threshold}.
struct ConfidenceSet {
  VectorXd center;
  MatrixXd shape;
  double threshold = 0.0;
  double alpha = 0.05;
  Eigen::Index draws = 0;
  std::uint64_t seed = 0;

  bool contains(const VectorXd& v) const;
  /// log volume of the ellipsoid up to the unit-ball constant.
  double log_volume() const;
};

/// Point estimates, covariance estimators and the estimated law of
/// tau_hat - tau for one observed experiment.
struct Analysis {
  VectorXd tau_hat;
  MatrixXd neyman;
  MatrixXd vhat_perp;
  std::vector<MatrixXd> coefficients;  // per grid cell
  AsymptoticLaw law;
  /// Shape of the confidence sets: V_hat^perp, or the Neyman estimate for
  /// complete randomization.
  MatrixXd shape;
};

/// Complete randomization uses the Neyman estimate as a Gaussian law;
/// every other criterion uses V_hat^perp plus one truncated component per
/// grid cell.
Analysis analyze(const VectorXd& y, const Assignment& z, const BalanceEvaluator& design);

/// C base C' + sum_i v_i C coef_i coef_i' C'. Throws if C is rank deficient.
MatrixXd covariance_estimate(const MatrixXd& C, const AsymptoticLaw& law);

void check_full_row_rank(const MatrixXd& C);

/// One confidence set per alpha for C tau, all thresholds from a single
/// batch of law draws, so smaller alphas give nested larger sets.
std::vector<ConfidenceSet> confidence_sets(const Analysis& a, const MatrixXd& C,
                                           const std::vector<double>& alphas, const Rng& rng,
                                           Eigen::Index draws, int workers = 1);

ConfidenceSet confidence_set(const Analysis& a, const MatrixXd& C, double alpha, const Rng& rng,
                             Eigen::Index draws, int workers = 1);

struct EffectInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double threshold = 0.0;
};

/// Symmetric interval for each effect (C = row f of the identity), all from
/// one batch of law draws.
std::vector<EffectInterval> effect_intervals(const Analysis& a, double alpha, const Rng& rng,
                                             Eigen::Index draws, int workers = 1);

}  // namespace refac
