#pragma once

#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "refac/design_core.hpp"

namespace refac {

inline constexpr double kUntruncated = std::numeric_limits<double>::infinity();

/// Thresholds given directly (a) or through per-tier acceptance
/// probabilities (p).
struct ThresholdSpec {
  enum class Kind { kThreshold, kProbability };
  Kind kind = Kind::kProbability;
  std::vector<double> values;
};

struct Crfe {};

struct Refm {
  ThresholdSpec threshold;
};

struct TiersF {
  EffectTierPartition effects;
  ThresholdSpec thresholds;
};

struct TiersCF {
  EffectTierPartition effects;
  CovariateTierPartition covariates;
  TierGrid grid;
  ThresholdSpec thresholds;
};

using BalanceCriterion = std::variant<Crfe, Refm, TiersF, TiersCF>;

std::string criterion_name(const BalanceCriterion& c);

/// Every criterion in one shape: covariate tiers x effect tiers, grouped
/// into grid cells, one threshold per cell. ReFM is the 1 x 1 grid, tiers
/// of effects use one covariate tier, and CRFE is ReFM with no threshold.
struct CriterionLayout {
  std::string name;
  bool crfe = false;
  EffectTierPartition effects;
  CovariateTierPartition covariates;
  TierGrid grid;
  std::vector<int> dims;   // lambda_j
  std::vector<double> a;   // kUntruncated for CRFE
  std::vector<double> p;   // per-cell acceptance probabilities

  int cells() const { return grid.count(); }
  double acceptance_probability() const;
};

/// Validates the criterion against F effects and L covariates and resolves
/// thresholds in both parameterizations.
CriterionLayout resolve_criterion(const BalanceCriterion& c, int F, int L);

/// Product of per-cell chi-square CDFs at the thresholds.
double acceptance_probability(const CriterionLayout& layout);

/// Q x L matrix of covariate means per treatment group.
MatrixXd group_means(const MatrixXd& X, const Assignment& z, int Q);

/// tau_x stacked effect-major: entry f * L + l.
VectorXd covariate_diff_in_means(const MatrixXd& X, const Assignment& z,
                                 const FactorialStructure& s);

/// theta_x = 2^{-(K-1)} sum_q c_q (x) xbar(q), tiers in order; within tier
/// h the entry for the i-th effect of the tier and covariate l is
/// offset_h * L + i * L + l.
VectorXd theta_x(const MatrixXd& X, const Assignment& z, const FactorialStructure& s,
                 const EffectOrthogonalization& orth);

/// V_xx = B~ (x) S_xx kept in factored form.
KroneckerSpd vxx(const FactorialStructure& s, const GroupSizes& sizes, const MatrixXd& Sxx);

double mahalanobis_refm(const VectorXd& tau_x, const KroneckerSpd& vxx);

/// M_h with W_xx[h] = C~_hh (x) S_xx.
std::vector<double> mahalanobis_tiers_f(const VectorXd& theta, const EffectOrthogonalization& orth,
                                        const SpdFactor& Sxx);

struct BalanceReport {
  MatrixXd cell_stats;               // M_{t,h}, T x H
  std::vector<double> tier_stats;    // grid sums, one per cell
  std::vector<double> thresholds;
  bool accepted = false;
  double acceptance_probability = 1.0;

  /// Largest statistic-to-threshold ratio; 0 when nothing is truncated.
  double max_ratio() const;
};

/// M_{t,h} for all cells of an orthogonalized design, plus grid sums.
/// Thresholds are left empty and `accepted` false.
BalanceReport mahalanobis_tiers_cf(const MatrixXd& E, const Assignment& z,
                                   const FactorialStructure& s, const EffectOrthogonalization& orth,
                                   const CovariateTierPartition& covariates, const TierGrid& grid);

/// Precomputed design: structure, sizes, covariates and criterion. Each
/// statistic is M_{t,h} = ||A_h Xbar R_t||_F^2 with
/// A_h = 2^{-(K-1)} C~_hh^{-1/2} C[h] and R_t = Gamma[:, t] S_{e[t]}^{-1/2},
/// so evaluating an assignment costs one pass for the group means.
class BalanceEvaluator {
 public:
  BalanceEvaluator(FactorialStructure s, GroupSizes sizes, MatrixXd X,
                   const BalanceCriterion& criterion);

  const FactorialStructure& structure() const { return s_; }
  const GroupSizes& sizes() const { return sizes_; }
  const MatrixXd& covariates() const { return X_; }
  const CriterionLayout& layout() const { return layout_; }
  const EffectOrthogonalization& effects() const { return effects_; }
  const CovariateOrthogonalization& covariate_orthogonalization() const { return cov_; }
  /// Factored S_{e[t]e[t]} per covariate tier.
  const std::vector<SpdFactor>& tier_covariances() const { return tier_cov_; }
  int L() const { return static_cast<int>(X_.cols()); }

  BalanceReport evaluate(const Assignment& z) const;
  BalanceReport evaluate_means(const MatrixXd& xbar) const;
  MatrixXd group_means(const Assignment& z) const;

 private:
  FactorialStructure s_;
  GroupSizes sizes_;
  MatrixXd X_;
  CriterionLayout layout_;
  EffectOrthogonalization effects_;
  CovariateOrthogonalization cov_;
  std::vector<SpdFactor> tier_cov_;
  std::vector<MatrixXd> left_;   // A_h
  std::vector<MatrixXd> right_;  // R_t
};

}  // namespace refac
