#include "refac/balance.hpp"

#include <cmath>
#include <string>

#include "refac/chisq.hpp"
#include "refac/errors.hpp"

namespace refac {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void resolve_thresholds(const ThresholdSpec& spec, CriterionLayout& layout) {
  const std::size_t J = layout.dims.size();
  if (spec.values.size() != J) {
    throw ValidationError(layout.name + " needs " + std::to_string(J) + " threshold values, got " +
                          std::to_string(spec.values.size()));
  }
  layout.a.resize(J);
  layout.p.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double v = spec.values[j];
    if (spec.kind == ThresholdSpec::Kind::kProbability) {
      if (!(v > 0.0 && v < 1.0)) {
        throw ValidationError("acceptance probability for tier " + std::to_string(j + 1) +
                              " must lie in (0, 1), got " + std::to_string(v) +
                              " (use the crfe criterion for no balance constraint)");
      }
      layout.p[j] = v;
      layout.a[j] = chisq::quantile(layout.dims[j], v);
    } else {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError("threshold for tier " + std::to_string(j + 1) +
                              " must be positive and finite, got " + std::to_string(v));
      }
      layout.a[j] = v;
      layout.p[j] = chisq::cdf(layout.dims[j], v);
    }
  }
}

void finish_layout(CriterionLayout& layout, int F, int L) {
  validate_partition(layout.effects, F, "effect");
  validate_partition(layout.covariates, L, "covariate");
  validate_grid(layout.grid, layout.covariates.count(), layout.effects.count());
  layout.dims = grid_dimensions(layout.grid, layout.covariates.sizes(), layout.effects.sizes());
}

}  // namespace

std::string criterion_name(const BalanceCriterion& c) {
  return std::visit(Overloaded{[](const Crfe&) { return std::string("crfe"); },
                               [](const Refm&) { return std::string("refm"); },
                               [](const TiersF&) { return std::string("tiers_f"); },
                               [](const TiersCF&) { return std::string("tiers_cf"); }},
                    c);
}

double CriterionLayout::acceptance_probability() const { return refac::acceptance_probability(*this); }

double acceptance_probability(const CriterionLayout& layout) {
  double p = 1.0;
  for (std::size_t j = 0; j < layout.a.size(); ++j) {
    if (std::isinf(layout.a[j])) continue;
    p *= chisq::cdf(layout.dims[j], layout.a[j]);
  }
  return p;
}

CriterionLayout resolve_criterion(const BalanceCriterion& c, int F, int L) {
  CriterionLayout layout;
  layout.name = criterion_name(c);
  if (std::holds_alternative<Crfe>(c)) {
    layout.crfe = true;
    layout.effects = single_effect_tier(F);
    if (L == 0) return layout;
    layout.covariates = single_covariate_tier(L);
    layout.grid = TierGrid::single_cell(1, 1);
    finish_layout(layout, F, L);
    layout.a = {kUntruncated};
    layout.p = {1.0};
    return layout;
  }
  if (L < 1) throw ValidationError(layout.name + " needs at least one covariate");
  std::visit(Overloaded{[](const Crfe&) {},
                        [&](const Refm& r) {
                          layout.effects = single_effect_tier(F);
                          layout.covariates = single_covariate_tier(L);
                          layout.grid = TierGrid::single_cell(1, 1);
                          finish_layout(layout, F, L);
                          resolve_thresholds(r.threshold, layout);
                        },
                        [&](const TiersF& r) {
                          layout.effects = r.effects;
                          layout.covariates = single_covariate_tier(L);
                          validate_partition(layout.effects, F, "effect");
                          layout.grid = TierGrid::per_effect_tier(layout.effects.count());
                          finish_layout(layout, F, L);
                          resolve_thresholds(r.thresholds, layout);
                        },
                        [&](const TiersCF& r) {
                          layout.effects = r.effects;
                          layout.covariates = r.covariates;
                          layout.grid = r.grid;
                          finish_layout(layout, F, L);
                          resolve_thresholds(r.thresholds, layout);
                        }},
             c);
  return layout;
}

MatrixXd group_means(const MatrixXd& X, const Assignment& z, int Q) {
  if (static_cast<Eigen::Index>(z.size()) != X.rows()) {
    throw ValidationError("assignment has " + std::to_string(z.size()) + " units but data has " +
                          std::to_string(X.rows()));
  }
  MatrixXd sums = MatrixXd::Zero(Q, X.cols());
  std::vector<int> counts(Q, 0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int q = z[i];
    if (q < 0 || q >= Q) throw ValidationError("treatment index out of range");
    sums.row(q) += X.row(static_cast<Eigen::Index>(i));
    ++counts[q];
  }
  for (int q = 0; q < Q; ++q) {
    if (counts[q] == 0) throw ValidationError("group " + std::to_string(q + 1) + " is empty");
    sums.row(q) /= counts[q];
  }
  return sums;
}

VectorXd covariate_diff_in_means(const MatrixXd& X, const Assignment& z,
                                 const FactorialStructure& s) {
  const MatrixXd xbar = group_means(X, z, s.Q);
  return stack_rows(s.contrast_scale() * s.G * xbar);
}

VectorXd theta_x(const MatrixXd& X, const Assignment& z, const FactorialStructure& s,
                 const EffectOrthogonalization& orth) {
  const MatrixXd xbar = group_means(X, z, s.Q);
  return stack_rows(s.contrast_scale() * orth.C * xbar);
}

KroneckerSpd vxx(const FactorialStructure& s, const GroupSizes& sizes, const MatrixXd& Sxx) {
  return KroneckerSpd(b_tilde(s, sizes), Sxx, "V_xx");
}

double mahalanobis_refm(const VectorXd& tau_x, const KroneckerSpd& v) {
  if (tau_x.size() != v.size()) throw ValidationError("tau_x length does not match V_xx");
  return v.quadratic_form(tau_x);
}

std::vector<double> mahalanobis_tiers_f(const VectorXd& theta, const EffectOrthogonalization& orth,
                                        const SpdFactor& Sxx) {
  const Eigen::Index L = Sxx.matrix.rows();
  if (theta.size() != orth.C.rows() * L) throw ValidationError("theta_x has the wrong length");
  std::vector<double> out;
  for (int h = 0; h < orth.tiers(); ++h) {
    const MatrixXd block =
        unstack_rows(theta.segment(orth.offsets[h] * L, orth.tier_size(h) * L), orth.tier_size(h), L);
    out.push_back((orth.blocks[h].inv_sqrt * block * Sxx.inv_sqrt).squaredNorm());
  }
  return out;
}

double BalanceReport::max_ratio() const {
  double ratio = 0.0;
  for (std::size_t j = 0; j < tier_stats.size() && j < thresholds.size(); ++j) {
    if (std::isinf(thresholds[j])) continue;
    ratio = std::max(ratio, tier_stats[j] / thresholds[j]);
  }
  return ratio;
}

BalanceReport mahalanobis_tiers_cf(const MatrixXd& E, const Assignment& z,
                                   const FactorialStructure& s, const EffectOrthogonalization& orth,
                                   const CovariateTierPartition& covariates, const TierGrid& grid) {
  const MatrixXd ebar = group_means(E, z, s.Q);
  const MatrixXd S = finite_population_covariance(E);
  BalanceReport report;
  report.cell_stats.resize(covariates.count(), orth.tiers());
  for (int t = 0; t < covariates.count(); ++t) {
    const auto& cols = covariates.tiers[t];
    const SpdFactor St = factor_spd(select_columns(select_rows(S, cols), cols),
                                    "covariance of orthogonalized covariate tier " +
                                        std::to_string(t + 1));
    const MatrixXd et = select_columns(ebar, cols);
    for (int h = 0; h < orth.tiers(); ++h) {
      const MatrixXd theta = s.contrast_scale() * orth.tier_rows(h) * et;
      report.cell_stats(t, h) = (orth.blocks[h].inv_sqrt * theta * St.inv_sqrt).squaredNorm();
    }
  }
  for (const auto& cell : grid.cells) {
    double sum = 0.0;
    for (auto [t, h] : cell) sum += report.cell_stats(t, h);
    report.tier_stats.push_back(sum);
  }
  return report;
}

BalanceEvaluator::BalanceEvaluator(FactorialStructure s, GroupSizes sizes, MatrixXd X,
                                   const BalanceCriterion& criterion)
    : s_(std::move(s)), sizes_(std::move(sizes)), X_(std::move(X)) {
  validate_sizes(s_, sizes_);
  if (X_.rows() != sizes_.total()) {
    throw ValidationError("covariate matrix has " + std::to_string(X_.rows()) +
                          " rows but the group sizes add up to " + std::to_string(sizes_.total()));
  }
  if (!X_.allFinite()) throw ValidationError("covariates contain non-finite values");
  layout_ = resolve_criterion(criterion, s_.F, L());
  effects_ = orthogonalize_effect_coefficients(s_, sizes_, layout_.effects);
  if (L() == 0) return;

  cov_ = orthogonalize_covariates(X_, layout_.covariates);
  const MatrixXd S = finite_population_covariance(cov_.E);
  for (int t = 0; t < layout_.covariates.count(); ++t) {
    const auto& cols = layout_.covariates.tiers[t];
    tier_cov_.push_back(factor_spd(select_columns(select_rows(S, cols), cols),
                                   "degenerate covariates: covariance of covariate tier " +
                                       std::to_string(t + 1)));
    right_.push_back(select_columns(cov_.Gamma, cols) * tier_cov_.back().inv_sqrt);
  }
  for (int h = 0; h < effects_.tiers(); ++h) {
    left_.push_back(s_.contrast_scale() * effects_.blocks[h].inv_sqrt * effects_.tier_rows(h));
  }
}

MatrixXd BalanceEvaluator::group_means(const Assignment& z) const {
  return refac::group_means(X_, z, s_.Q);
}

BalanceReport BalanceEvaluator::evaluate(const Assignment& z) const {
  if (L() == 0) {
    BalanceReport report;
    report.accepted = true;
    return report;
  }
  return evaluate_means(group_means(z));
}

BalanceReport BalanceEvaluator::evaluate_means(const MatrixXd& xbar) const {
  BalanceReport report;
  report.thresholds = layout_.a;
  report.acceptance_probability = layout_.acceptance_probability();
  const int T = layout_.covariates.count();
  const int H = effects_.tiers();
  report.cell_stats.resize(T, H);
  for (int h = 0; h < H; ++h) {
    const MatrixXd lx = left_[h] * xbar;
    for (int t = 0; t < T; ++t) report.cell_stats(t, h) = (lx * right_[t]).squaredNorm();
  }
  report.accepted = true;
  for (int j = 0; j < layout_.cells(); ++j) {
    double sum = 0.0;
    for (auto [t, h] : layout_.grid.cells[j]) sum += report.cell_stats(t, h);
    report.tier_stats.push_back(sum);
    if (sum > layout_.a[j]) report.accepted = false;
  }
  return report;
}

}  // namespace refac
