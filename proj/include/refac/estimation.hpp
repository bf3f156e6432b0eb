#pragma once

#include <vector>

#include "refac/balance.hpp"

namespace refac {

/// tau_hat_f = 2^{-(K-1)} sum_q g_fq Ybar(q).
VectorXd effect_estimates(const VectorXd& y, const Assignment& z, const FactorialStructure& s);

/// Within-group sample moments, n_q - 1 divisors.
struct GroupMoments {
  int n = 0;
  double mean_y = 0.0;
  RowVectorXd mean_x;
  double s_yy = 0.0;
  RowVectorXd s_yx;  // 1 x L
  MatrixXd s_xx;     // L x L
  double s_perp = 0.0;
};

struct SampleMoments {
  std::vector<GroupMoments> groups;
  int L = 0;
};

/// Requires n_q >= L + 2 in every group and nonsingular s_xx(q).
SampleMoments sample_moments(const VectorXd& y, const MatrixXd& X, const Assignment& z, int Q);

/// 2^{-2(K-1)} sum_q n_q^{-1} s_qq b_q b_q'.
MatrixXd neyman_covariance(const SampleMoments& m, const FactorialStructure& s);

/// 2^{-2(K-1)} sum_q n_q^{-1} s_qq^perp b_q b_q'.
MatrixXd vhat_tautau_perp(const SampleMoments& m, const FactorialStructure& s);

/// Estimated cross covariance between tau_hat and theta_e[t][h] for every
/// (t, h) cell, F x (F_h L_t), built from
/// s_{q,e[t]} s_{e[t]e[t]}(q)^{-1/2} S_{e[t]e[t]}^{1/2}.
std::vector<std::vector<MatrixXd>> cross_covariance_estimates(const SampleMoments& m,
                                                              const BalanceEvaluator& design);

/// One F x lambda_j coefficient per grid cell j: the estimated cross
/// covariance times the inverse square root of the cell's covariance.
/// ReFM gives V_tx V_xx^{-1/2}; tiers of effects give W_tx[h] W_xx[h]^{-1/2}.
std::vector<MatrixXd> projection_coefficient_estimates(const SampleMoments& m,
                                                       const BalanceEvaluator& design);

/// Ground truth from the full n x Q potential-outcome matrix. Covariances
/// of tau_hat under complete randomization are exact finite-population
/// values.
struct PopulationTruth {
  VectorXd tau;
  MatrixXd S_tautau;  // covariance of individual effects
  MatrixXd V;         // Cov(tau_hat)
  MatrixXd V_tx;      // Cov(tau_hat, tau_x), F x LF
  MatrixXd V_xx;      // B~ (x) S_xx
  MatrixXd V_par;     // V_tx V_xx^{-1} V_xt
  MatrixXd V_perp;
  std::vector<MatrixXd> explained;     // per grid cell
  std::vector<MatrixXd> coefficients;  // per grid cell, F x lambda_j
  VectorXd R2;
};

PopulationTruth population_truth(const MatrixXd& Y, const BalanceEvaluator& design);

}  // namespace refac
