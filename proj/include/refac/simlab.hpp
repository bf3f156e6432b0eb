#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "refac/inference.hpp"

namespace refac {

struct CovariateRecipe {
  enum class Kind { kNormal, kBernoulli, kUniform };
  Kind kind = Kind::kNormal;
  double mean = 0.0;  // normal
  double sd = 1.0;    // normal
  double prob = 0.5;  // bernoulli
  double lo = 0.0;    // uniform
  double hi = 1.0;    // uniform
};

/// Y_i(q) = intercept_q + x_i'(beta + beta_by_group[q]) + noise_sd * e_i(q).
/// Additive populations share one noise draw across q and must leave
/// beta_by_group empty; otherwise e_i(q) has correlation noise_correlation
/// across q.
struct OutcomeRecipe {
  std::vector<double> intercepts;  // Q
  std::vector<double> beta;        // L
  std::vector<std::vector<double>> beta_by_group;  // Q x L or empty
  double noise_sd = 1.0;
  bool additive = true;
  double noise_correlation = 0.0;
  std::optional<std::pair<double, double>> clamp;
};

/// Covariates come from latent equicorrelated Gaussians (correlation
/// `covariate_correlation`) pushed through each column's marginal.
struct PopulationSpec {
  int K = 1;
  GroupSizes sizes;
  std::vector<CovariateRecipe> covariates;
  double covariate_correlation = 0.0;
  OutcomeRecipe outcome;

  int n() const { return sizes.total(); }
  int L() const { return static_cast<int>(covariates.size()); }
};

void validate_spec(const PopulationSpec& spec);

struct Population {
  MatrixXd X;  // n x L
  MatrixXd Y;  // n x Q
};

Population generate_population(const PopulationSpec& spec, const Rng& rng);

/// n about 1400 in unequal groups (856, 216, 208, 118), five mixed
/// covariates, non-additive outcomes clamped to [0, 4], R^2 near 0.25.
PopulationSpec education_like_spec();

struct DesignSpec {
  std::string name;
  BalanceCriterion criterion;
};

struct ReplicateOptions {
  int reps = 2000;
  int workers = 1;
  Eigen::Index law_draws = 10'000;      // per replication; 0 skips confidence sets
  Eigen::Index theory_draws = 100'000;  // for theoretical quantile ranges
  double alpha = 0.05;
  long long max_draws = 0;
};

inline constexpr int kMinReps = 100;

struct EffectSummary {
  std::string label;
  double tau = 0.0;
  double crfe_variance = 0.0;  // exact finite-population Var under complete randomization
  double variance = 0.0;       // mean squared error over replications
  double variance_se = 0.0;
  double priasv = 0.0;
  double priasv_se = 0.0;
  double priasv_theory = 0.0;
  double range_reduction = 0.0;  // 95% symmetric quantile range vs complete randomization
  double range_reduction_se = 0.0;
  double range_reduction_theory = 0.0;
  double R2 = 0.0;
};

struct DesignSummary {
  std::string name;
  std::string criterion;
  std::vector<int> dims;
  std::vector<double> thresholds;
  std::vector<double> probabilities;
  double p_a = 1.0;
  double acceptance_rate = 0.0;
  double acceptance_rate_se = 0.0;
  double mean_draws = 0.0;
  bool has_inference = false;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_log_volume = 0.0;
  double mean_log_volume_se = 0.0;
  std::vector<EffectSummary> effects;
};

struct ReplicationReport {
  int schema_version = 1;
  int reps = 0;
  std::uint64_t seed = 0;
  int workers = 1;
  int n = 0;
  int K = 0;
  int L = 0;
  double alpha = 0.05;
  Eigen::Index law_draws = 0;
  std::vector<DesignSummary> designs;
  double runtime_seconds = 0.0;
};

/// Replication r of design d draws its assignment from
/// Rng(seed).substream(d).substream(r).substream(0) and its law draws from
/// .substream(1); results do not depend on the worker count.
ReplicationReport replicate(const Population& pop, int K, const GroupSizes& sizes,
                            const std::vector<DesignSpec>& designs, const ReplicateOptions& opt,
                            std::uint64_t seed);

struct ImbalanceResult {
  double fraction = 0.0;
  double se = 0.0;
  long long draws = 0;
};

/// Share of complete randomizations in which some standardized covariate
/// difference in means exceeds `z` in absolute value.
ImbalanceResult imbalance_fraction(const MatrixXd& X, const FactorialStructure& s,
                                   const GroupSizes& sizes, long long draws, const Rng& rng,
                                   double z = 1.959963984540054);

struct TradeoffCurve {
  std::vector<double> p_first;            // p_{a1}
  std::vector<std::vector<double>> rest;  // probabilities of the remaining cells
  MatrixXd priasv;                        // grid x F
  std::vector<std::string> labels;
};

/// Theoretical PRIASV as the first cell's acceptance probability moves
/// over `p_first` with the overall p_a fixed; remaining cells split
/// p_a / p_{a1} evenly. A remaining probability of 1 drops that truncation.
TradeoffCurve tier_tradeoff_sweep(const Population& pop, int K, const GroupSizes& sizes,
                                  const BalanceCriterion& tiers, double p_a,
                                  const std::vector<double>& p_first);

std::string report_csv(const ReplicationReport& r);
std::string report_json(const ReplicationReport& r, bool include_runtime = false);
std::string tradeoff_csv(const TradeoffCurve& c);

}  // namespace refac
