#include "refac/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "refac/chisq.hpp"
#include "refac/errors.hpp"
#include "refac/rerandomizer.hpp"

namespace refac {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Stream ids for the theory-side law draws of design d; far from any
// replication index.
constexpr std::uint64_t kTheoryStream = 0x7468656f72790000ull;

template <class Fn>
void parallel_ranges(int count, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex mu;
  const int chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct RepResult {
  VectorXd error;
  long long draws = 0;
  bool covered = false;
  double log_volume = 0.0;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) / static_cast<double>(v.size()));
}

// 0.95 quantile of |x| with a distribution-free standard error from the
// order statistics one binomial SD either side.
std::pair<double, double> abs_quantile_with_se(const std::vector<double>& x, double level) {
  VectorXd a(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) a(i) = std::abs(x[i]);
  const double q = empirical_quantile(a, 1.0 - level);
  const auto n = static_cast<double>(x.size());
  const double sd = std::sqrt(n * level * (1.0 - level));
  const auto lo = static_cast<Eigen::Index>(std::clamp(std::floor(n * level - sd), 1.0, n));
  const auto hi = static_cast<Eigen::Index>(std::clamp(std::ceil(n * level + sd), 1.0, n));
  return {q, 0.5 * (a(hi - 1) - a(lo - 1))};
}

}  // namespace

void validate_spec(const PopulationSpec& spec) {
  const FactorialStructure s = build_structure(spec.K);
  validate_sizes(s, spec.sizes);
  const int L = spec.L();
  const auto& o = spec.outcome;
  if (!(spec.covariate_correlation >= 0.0 && spec.covariate_correlation < 1.0)) {
    throw ValidationError("covariate correlation must lie in [0, 1)");
  }
  for (int l = 0; l < L; ++l) {
    const auto& c = spec.covariates[l];
    const std::string where = "covariate " + std::to_string(l + 1);
    if (c.kind == CovariateRecipe::Kind::kNormal && !(c.sd > 0.0)) {
      throw ValidationError(where + ": sd must be positive");
    }
    if (c.kind == CovariateRecipe::Kind::kBernoulli && !(c.prob > 0.0 && c.prob < 1.0)) {
      throw ValidationError(where + ": prob must lie in (0, 1)");
    }
    if (c.kind == CovariateRecipe::Kind::kUniform && !(c.hi > c.lo)) {
      throw ValidationError(where + ": hi must exceed lo");
    }
  }
  if (static_cast<int>(o.intercepts.size()) != s.Q) {
    throw ValidationError("outcome needs " + std::to_string(s.Q) + " intercepts");
  }
  if (static_cast<int>(o.beta.size()) != L) {
    throw ValidationError("outcome needs " + std::to_string(L) + " slopes in beta");
  }
  if (!o.beta_by_group.empty()) {
    if (o.additive) {
      throw ValidationError("beta_by_group makes effects vary across units; it needs additive = false");
    }
    if (static_cast<int>(o.beta_by_group.size()) != s.Q) {
      throw ValidationError("beta_by_group needs one row per treatment combination");
    }
    for (const auto& row : o.beta_by_group) {
      if (static_cast<int>(row.size()) != L) throw ValidationError("beta_by_group rows need L entries");
    }
  }
  if (!(o.noise_sd >= 0.0)) throw ValidationError("noise_sd must be nonnegative");
  if (!(o.noise_correlation >= 0.0 && o.noise_correlation <= 1.0)) {
    throw ValidationError("noise_correlation must lie in [0, 1]");
  }
  if (o.clamp) {
    if (!(o.clamp->second > o.clamp->first)) throw ValidationError("clamp range is empty");
    if (o.additive) {
      throw ValidationError("clamping outcomes breaks additivity; set additive = false");
    }
  }
}

Population generate_population(const PopulationSpec& spec, const Rng& rng) {
  validate_spec(spec);
  const int n = spec.n();
  const int L = spec.L();
  const int Q = 1 << spec.K;
  Population pop;
  pop.X.resize(n, L);
  pop.Y.resize(n, Q);
  Rng cov_rng = rng.substream(0);
  Rng out_rng = rng.substream(1);
  const double rho = spec.covariate_correlation;
  for (int i = 0; i < n; ++i) {
    const double common = cov_rng.normal();
    for (int l = 0; l < L; ++l) {
      const double z = std::sqrt(rho) * common + std::sqrt(1.0 - rho) * cov_rng.normal();
      const auto& c = spec.covariates[l];
      switch (c.kind) {
        case CovariateRecipe::Kind::kNormal: pop.X(i, l) = c.mean + c.sd * z; break;
        case CovariateRecipe::Kind::kBernoulli: pop.X(i, l) = normal_cdf(z) < c.prob ? 1.0 : 0.0; break;
        case CovariateRecipe::Kind::kUniform: pop.X(i, l) = c.lo + (c.hi - c.lo) * normal_cdf(z); break;
      }
    }
  }
  const auto& o = spec.outcome;
  const VectorXd beta = Eigen::Map<const VectorXd>(o.beta.data(), L);
  const double shared = std::sqrt(o.noise_correlation);
  const double own = std::sqrt(1.0 - o.noise_correlation);
  for (int i = 0; i < n; ++i) {
    const double base = pop.X.row(i).dot(beta);
    const double common = out_rng.normal();
    for (int q = 0; q < Q; ++q) {
      double y = o.intercepts[q] + base;
      if (o.additive) {
        y += o.noise_sd * common;
      } else {
        for (int l = 0; l < L && !o.beta_by_group.empty(); ++l) y += pop.X(i, l) * o.beta_by_group[q][l];
        y += o.noise_sd * (shared * common + own * out_rng.normal());
      }
      if (o.clamp) y = std::clamp(y, o.clamp->first, o.clamp->second);
      pop.Y(i, q) = y;
    }
  }
  return pop;
}

PopulationSpec education_like_spec() {
  using Kind = CovariateRecipe::Kind;
  PopulationSpec spec;
  spec.K = 2;
  spec.sizes = GroupSizes{{856, 216, 208, 118}};
  spec.covariates = {
      {Kind::kNormal, 0.0, 1.0, 0.5, 0.0, 1.0},     // prior grade average, standardized
      {Kind::kBernoulli, 0.0, 1.0, 0.42, 0.0, 1.0},  // gender
      {Kind::kNormal, 0.0, 1.0, 0.5, 0.0, 1.0},      // age, standardized
      {Kind::kBernoulli, 0.0, 1.0, 0.6, 0.0, 1.0},   // lives at home
      {Kind::kBernoulli, 0.0, 1.0, 0.4, 0.0, 1.0},   // rarely procrastinates
  };
  spec.covariate_correlation = 0.1;
  auto& o = spec.outcome;
  o.intercepts = {1.75, 1.85, 1.9, 2.05};
  o.beta = {0.42, 0.12, -0.06, 0.05, 0.15};
  o.beta_by_group = {{0.0, 0.0, 0.0, 0.0, 0.0},
                     {0.05, -0.02, 0.0, 0.02, 0.0},
                     {0.08, 0.0, 0.02, 0.0, 0.03},
                     {0.15, 0.03, 0.0, -0.02, 0.05}};
  o.noise_sd = 0.9;
  o.additive = false;
  o.noise_correlation = 0.6;
  o.clamp = std::make_pair(0.0, 4.0);
  return spec;
}

ReplicationReport replicate(const Population& pop, int K, const GroupSizes& sizes,
                            const std::vector<DesignSpec>& designs, const ReplicateOptions& opt,
                            std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();
  if (opt.reps < kMinReps) {
    throw ValidationError("replication needs at least " + std::to_string(kMinReps) +
                          " reps, got " + std::to_string(opt.reps));
  }
  if (designs.empty()) throw ValidationError("no designs to replicate");
  if (opt.law_draws != 0 && opt.law_draws < kMinQuantileDraws) {
    throw ValidationError("law draws must be 0 or at least " + std::to_string(kMinQuantileDraws));
  }
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const FactorialStructure s = build_structure(K);
  validate_sizes(s, sizes);
  if (pop.Y.rows() != sizes.total() || pop.Y.cols() != s.Q) {
    throw ValidationError("population outcomes must be n x Q");
  }

  ReplicationReport report;
  report.reps = opt.reps;
  report.seed = seed;
  report.workers = opt.workers;
  report.n = sizes.total();
  report.K = K;
  report.L = static_cast<int>(pop.X.cols());
  report.alpha = opt.alpha;
  report.law_draws = opt.law_draws;

  const Rng root(seed);
  const double z975 = std::sqrt(chisq::quantile(1, 0.95));
  for (std::size_t d = 0; d < designs.size(); ++d) {
    const BalanceEvaluator design(s, sizes, pop.X, designs[d].criterion);
    const auto& layout = design.layout();
    const PopulationTruth truth = population_truth(pop.Y, design);
    const CorrelationProfile profile = correlation_profile(truth.V, truth.explained);
    std::vector<std::optional<double>> thresholds;
    bool truncated = false;
    for (double a : layout.a) {
      thresholds.push_back(std::isinf(a) ? std::nullopt : std::optional<double>(a));
      truncated = truncated || !std::isinf(a);
    }
    const VectorXd theory_priasv = priasv(profile, layout.dims, thresholds);

    VectorXd theory_range = VectorXd::Zero(s.F);
    if (truncated) {
      AsymptoticLaw law;
      law.base_cov = truth.V_perp;
      for (int j = 0; j < layout.cells(); ++j) {
        law.components.push_back({truth.coefficients[j], layout.dims[j], thresholds[j]});
      }
      const MatrixXd phi = simulate_law(law, root.substream(kTheoryStream + d),
                                        std::max<Eigen::Index>(opt.theory_draws, 1), opt.workers);
      for (int f = 0; f < s.F; ++f) {
        VectorXd a = phi.col(f).cwiseAbs();
        theory_range(f) = 1.0 - empirical_quantile(a, 0.05) / (z975 * std::sqrt(truth.V(f, f)));
      }
    }

    std::vector<RepResult> results(opt.reps);
    const Rng design_rng = root.substream(d);
    const MatrixXd identity = MatrixXd::Identity(s.F, s.F);
    parallel_ranges(opt.reps, opt.workers, [&](int begin, int end) {
      for (int r = begin; r < end; ++r) {
        const Rng rep_rng = design_rng.substream(static_cast<std::uint64_t>(r));
        Rng assign_rng = rep_rng.substream(0);
        const auto outcome = rerandomize(design, assign_rng, opt.max_draws);
        VectorXd y(sizes.total());
        for (int i = 0; i < sizes.total(); ++i) y(i) = pop.Y(i, outcome.assignment[i]);
        RepResult& res = results[r];
        res.draws = outcome.draws_attempted;
        if (opt.law_draws > 0) {
          const Analysis a = analyze(y, outcome.assignment, design);
          const ConfidenceSet cs =
              confidence_set(a, identity, opt.alpha, rep_rng.substream(1), opt.law_draws);
          res.error = a.tau_hat - truth.tau;
          res.covered = cs.contains(truth.tau);
          res.log_volume = cs.log_volume();
        } else {
          res.error = effect_estimates(y, outcome.assignment, s) - truth.tau;
        }
      }
    });

    DesignSummary sum;
    sum.name = designs[d].name;
    sum.criterion = layout.name;
    sum.dims = layout.dims;
    sum.thresholds = layout.a;
    sum.probabilities = layout.p;
    sum.p_a = layout.acceptance_probability();
    long long total_draws = 0;
    std::vector<double> covered, volume;
    for (const auto& r : results) {
      total_draws += r.draws;
      covered.push_back(r.covered ? 1.0 : 0.0);
      volume.push_back(r.log_volume);
    }
    const double R = opt.reps;
    sum.mean_draws = static_cast<double>(total_draws) / R;
    sum.acceptance_rate = R / static_cast<double>(total_draws);
    sum.acceptance_rate_se = sum.acceptance_rate * std::sqrt((1.0 - sum.acceptance_rate) / R);
    sum.has_inference = opt.law_draws > 0;
    if (sum.has_inference) {
      sum.coverage = mean_of(covered);
      sum.coverage_se = std::sqrt(sum.coverage * (1.0 - sum.coverage) / R);
      sum.mean_log_volume = mean_of(volume);
      sum.mean_log_volume_se = se_of(volume);
    }
    for (int f = 0; f < s.F; ++f) {
      std::vector<double> err, sq;
      for (const auto& r : results) {
        err.push_back(r.error(f));
        sq.push_back(r.error(f) * r.error(f));
      }
      EffectSummary e;
      e.label = s.labels[f];
      e.tau = truth.tau(f);
      e.R2 = truth.R2(f);
      e.crfe_variance = truth.V(f, f);
      e.variance = mean_of(sq);
      e.variance_se = se_of(sq);
      e.priasv = 1.0 - e.variance / e.crfe_variance;
      e.priasv_se = e.variance_se / e.crfe_variance;
      e.priasv_theory = theory_priasv(f);
      const auto [q, q_se] = abs_quantile_with_se(err, 0.95);
      const double crfe_half = z975 * std::sqrt(e.crfe_variance);
      e.range_reduction = 1.0 - q / crfe_half;
      e.range_reduction_se = q_se / crfe_half;
      e.range_reduction_theory = theory_range(f);
      sum.effects.push_back(e);
    }
    report.designs.push_back(std::move(sum));
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

ImbalanceResult imbalance_fraction(const MatrixXd& X, const FactorialStructure& s,
                                   const GroupSizes& sizes, long long draws, const Rng& rng,
                                   double z) {
  validate_sizes(s, sizes);
  if (draws < 1) throw ValidationError("imbalance check needs at least one draw");
  if (X.rows() != sizes.total()) throw ValidationError("covariate rows do not match group sizes");
  const MatrixXd Bt = b_tilde(s, sizes);
  const MatrixXd Sxx = finite_population_covariance(X);
  // standard deviation of each tau_x entry, laid out as F x L
  MatrixXd sd(s.F, X.cols());
  for (int f = 0; f < s.F; ++f) {
    for (Eigen::Index l = 0; l < X.cols(); ++l) sd(f, l) = std::sqrt(Bt(f, f) * Sxx(l, l));
  }
  Rng local = rng;
  long long hits = 0;
  for (long long d = 0; d < draws; ++d) {
    const Assignment a = draw_crfe(sizes, local);
    const MatrixXd tau = s.contrast_scale() * s.G * group_means(X, a, s.Q);
    if ((tau.cwiseQuotient(sd).cwiseAbs().array() > z).any()) ++hits;
  }
  ImbalanceResult r;
  r.draws = draws;
  r.fraction = static_cast<double>(hits) / static_cast<double>(draws);
  r.se = std::sqrt(r.fraction * (1.0 - r.fraction) / static_cast<double>(draws));
  return r;
}

TradeoffCurve tier_tradeoff_sweep(const Population& pop, int K, const GroupSizes& sizes,
                                  const BalanceCriterion& tiers, double p_a,
                                  const std::vector<double>& p_first) {
  if (!(p_a > 0.0 && p_a < 1.0)) throw ValidationError("overall p_a must lie in (0, 1)");
  const FactorialStructure s = build_structure(K);
  const BalanceEvaluator design(s, sizes, pop.X, tiers);
  const auto& layout = design.layout();
  const int J = layout.cells();
  if (J < 2 || layout.crfe) throw ValidationError("the sweep needs a criterion with at least two tiers");
  const PopulationTruth truth = population_truth(pop.Y, design);
  const CorrelationProfile profile = correlation_profile(truth.V, truth.explained);

  TradeoffCurve curve;
  curve.labels = s.labels;
  curve.priasv.resize(static_cast<Eigen::Index>(p_first.size()), s.F);
  for (std::size_t i = 0; i < p_first.size(); ++i) {
    const double p1 = p_first[i];
    if (!(p1 >= p_a * (1.0 - 1e-12) && p1 <= 1.0)) {
      throw ValidationError("p_a1 = " + fmt(p1) + " is infeasible; it must lie in [p_a, 1]");
    }
    const double rest = std::min(1.0, std::pow(p_a / p1, 1.0 / (J - 1)));
    std::vector<std::optional<double>> thresholds;
    std::vector<double> rest_p;
    auto threshold_for = [&](int dim, double p) -> std::optional<double> {
      if (p >= 1.0 - 1e-12) return std::nullopt;
      return chisq::quantile(dim, p);
    };
    thresholds.push_back(threshold_for(layout.dims[0], p1));
    for (int j = 1; j < J; ++j) {
      thresholds.push_back(threshold_for(layout.dims[j], rest));
      rest_p.push_back(rest);
    }
    curve.p_first.push_back(p1);
    curve.rest.push_back(rest_p);
    curve.priasv.row(static_cast<Eigen::Index>(i)) = priasv(profile, layout.dims, thresholds).transpose();
  }
  return curve;
}

std::string report_csv(const ReplicationReport& r) {
  std::string out =
      "design,criterion,effect,tau,R2,crfe_variance,variance,variance_se,priasv,priasv_se,"
      "priasv_theory,range_reduction,range_reduction_se,range_reduction_theory,p_a,"
      "acceptance_rate,acceptance_rate_se,mean_draws,coverage,coverage_se\n";
  for (const auto& d : r.designs) {
    for (const auto& e : d.effects) {
      const std::string cov = d.has_inference ? fmt(d.coverage) : "";
      const std::string cov_se = d.has_inference ? fmt(d.coverage_se) : "";
      out += d.name + "," + d.criterion + "," + e.label + "," + fmt(e.tau) + "," + fmt(e.R2) + "," +
             fmt(e.crfe_variance) + "," + fmt(e.variance) + "," + fmt(e.variance_se) + "," +
             fmt(e.priasv) + "," + fmt(e.priasv_se) + "," + fmt(e.priasv_theory) + "," +
             fmt(e.range_reduction) + "," + fmt(e.range_reduction_se) + "," +
             fmt(e.range_reduction_theory) + "," + fmt(d.p_a) + "," + fmt(d.acceptance_rate) + "," +
             fmt(d.acceptance_rate_se) + "," + fmt(d.mean_draws) + "," + cov + "," + cov_se + "\n";
    }
  }
  return out;
}

std::string tradeoff_csv(const TradeoffCurve& c) {
  std::string out = "p_a1";
  for (std::size_t j = 0; j < (c.rest.empty() ? 0 : c.rest.front().size()); ++j) {
    out += ",p_a" + std::to_string(j + 2);
  }
  for (const auto& l : c.labels) out += ",priasv_" + l;
  out += "\n";
  for (std::size_t i = 0; i < c.p_first.size(); ++i) {
    out += fmt(c.p_first[i]);
    for (double p : c.rest[i]) out += "," + fmt(p);
    for (Eigen::Index f = 0; f < c.priasv.cols(); ++f) {
      out += "," + fmt(c.priasv(static_cast<Eigen::Index>(i), f));
    }
    out += "\n";
  }
  return out;
}

}  // namespace refac
