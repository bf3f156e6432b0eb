#include "refac/refac.h"

#include <json.hpp>
#include <memory>
#include <new>
#include <string>

#include "refac/chisq.hpp"
#include "refac/errors.hpp"
#include "refac/inference.hpp"
#include "refac/rerandomizer.hpp"
#include "refac/simlab.hpp"
#include "refac/simlab_json.hpp"

struct refac_criterion {
  refac::BalanceCriterion criterion;
};

struct refac_design {
  std::unique_ptr<refac::BalanceEvaluator> eval;
};

struct refac_analysis {
  const refac_design* design;
  refac::Analysis analysis;
};

struct refac_report {
  std::string csv;
  std::string json;
  std::string json_with_runtime;
};

namespace {

thread_local std::string last_error;

using refac::MatrixXd;
using refac::VectorXd;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Fn>
refac_status guard(Fn&& fn) {
  try {
    fn();
    return REFAC_OK;
  } catch (const refac::MaxDrawsExceeded& e) {
    last_error = e.what();
    return REFAC_ERR_MAX_DRAWS;
  } catch (const refac::ValidationError& e) {
    last_error = e.what();
    return REFAC_ERR_VALIDATION;
  } catch (const refac::NumericalError& e) {
    last_error = e.what();
    return REFAC_ERR_NUMERICAL;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return REFAC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return REFAC_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return REFAC_ERR_INTERNAL;
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw refac::ValidationError(message);
}

refac::ThresholdSpec threshold_spec(refac_threshold_kind kind, const double* values, int n) {
  require(kind == REFAC_THRESHOLD_A || kind == REFAC_THRESHOLD_P, "unknown threshold kind");
  require(n >= 1 && values != nullptr, "threshold values are required");
  refac::ThresholdSpec spec;
  spec.kind = kind == REFAC_THRESHOLD_A ? refac::ThresholdSpec::Kind::kThreshold
                                        : refac::ThresholdSpec::Kind::kProbability;
  spec.values.assign(values, values + n);
  return spec;
}

// Groups 0-based positions by their 1-based tier labels.
refac::TierPartition tiers_from_labels(const int* label, int count, const char* what) {
  require(count >= 1 && label != nullptr, "tier labels are required");
  int tiers = 0;
  for (int i = 0; i < count; ++i) {
    if (label[i] < 1) throw refac::ValidationError(std::string(what) + " tier labels start at 1");
    tiers = std::max(tiers, label[i]);
  }
  refac::TierPartition p;
  p.tiers.resize(tiers);
  for (int i = 0; i < count; ++i) p.tiers[label[i] - 1].push_back(i);
  for (int t = 0; t < tiers; ++t) {
    if (p.tiers[t].empty()) {
      throw refac::ValidationError(std::string(what) + " tier " + std::to_string(t + 1) +
                                   " has no members");
    }
  }
  return p;
}

refac::Assignment assignment_from(const int* z, int n) {
  require(z != nullptr, "assignment is required");
  refac::Assignment a(z, z + n);
  for (int& v : a) --v;
  return a;
}

MatrixXd contrast(const refac_analysis* a, const double* C, int p) {
  const int F = a->analysis.law.F();
  if (C == nullptr) {
    require(p == F, "identity contrast needs p = F");
    return MatrixXd::Identity(F, F);
  }
  require(p >= 1, "contrast needs at least one row");
  return Eigen::Map<const RowMajor>(C, p, F);
}

void write_matrix(const MatrixXd& m, double* out) {
  Eigen::Map<RowMajor>(out, m.rows(), m.cols()) = m;
}

refac::Population population_from(const char* spec_json, uint64_t seed, refac::PopulationSpec& spec) {
  require(spec_json != nullptr, "population spec is required");
  spec = refac::population_spec_from_json(spec_json);
  // the population uses its own stream so replications never reuse it
  return refac::generate_population(spec, refac::Rng(seed, 0x706f70756c617469ull));
}

}  // namespace

extern "C" {

const char* refac_version(void) { return "1.0.0"; }

const char* refac_last_error(void) { return last_error.c_str(); }

refac_status refac_chisq_cdf(double dof, double x, double* out) {
  return guard([&] {
    require(out, "output pointer is NULL");
    *out = refac::chisq::cdf(dof, x);
  });
}

refac_status refac_chisq_quantile(double dof, double p, double* out) {
  return guard([&] {
    require(out, "output pointer is NULL");
    *out = refac::chisq::quantile(dof, p);
  });
}

refac_status refac_v_constant(int m, double a, double* out) {
  return guard([&] {
    require(out, "output pointer is NULL");
    *out = refac::chisq::v_constant(m, a);
  });
}

refac_status refac_criterion_crfe(refac_criterion** out) {
  return guard([&] {
    require(out, "output pointer is NULL");
    *out = new refac_criterion{refac::Crfe{}};
  });
}

refac_status refac_criterion_refm(refac_threshold_kind kind, double value, refac_criterion** out) {
  return guard([&] {
    require(out, "output pointer is NULL");
    *out = new refac_criterion{refac::Refm{threshold_spec(kind, &value, 1)}};
  });
}

refac_status refac_criterion_tiers_f(int F, const int* effect_tier, refac_threshold_kind kind,
                                     const double* values, int n_values, refac_criterion** out) {
  return guard([&] {
    require(out, "output pointer is NULL");
    refac::TiersF c;
    static_cast<refac::TierPartition&>(c.effects) = tiers_from_labels(effect_tier, F, "effect");
    c.thresholds = threshold_spec(kind, values, n_values);
    *out = new refac_criterion{c};
  });
}

refac_status refac_criterion_tiers_cf(int F, const int* effect_tier, int L, const int* covariate_tier,
                                      const int* cell_of, refac_threshold_kind kind,
                                      const double* values, int n_values, refac_criterion** out) {
  return guard([&] {
    require(out, "output pointer is NULL");
    refac::TiersCF c;
    static_cast<refac::TierPartition&>(c.effects) = tiers_from_labels(effect_tier, F, "effect");
    static_cast<refac::TierPartition&>(c.covariates) =
        tiers_from_labels(covariate_tier, L, "covariate");
    const int T = c.covariates.count();
    const int H = c.effects.count();
    if (cell_of == nullptr) {
      c.grid = refac::TierGrid::triangular(T, H);
    } else {
      int cells = 0;
      for (int i = 0; i < T * H; ++i) {
        require(cell_of[i] >= 1, "grid cell labels start at 1");
        cells = std::max(cells, cell_of[i]);
      }
      c.grid.cells.resize(cells);
      for (int t = 0; t < T; ++t) {
        for (int h = 0; h < H; ++h) c.grid.cells[cell_of[t * H + h] - 1].emplace_back(t, h);
      }
    }
    c.thresholds = threshold_spec(kind, values, n_values);
    *out = new refac_criterion{c};
  });
}

refac_status refac_criterion_from_json(int K, const char* json, refac_criterion** out) {
  return guard([&] {
    require(out && json, "NULL argument");
    *out = new refac_criterion{refac::criterion_from_json(json, refac::build_structure(K))};
  });
}

void refac_criterion_free(refac_criterion* c) { delete c; }

refac_status refac_design_create(int K, const int* sizes, int Q, const double* X, int n, int L,
                                 const refac_criterion* criterion, refac_design** out) {
  return guard([&] {
    require(out && sizes && criterion, "NULL argument");
    require(L == 0 || X != nullptr, "covariate matrix is NULL");
    require(n >= 0 && L >= 0, "negative dimensions");
    refac::FactorialStructure s = refac::build_structure(K);
    require(Q == s.Q, "number of group sizes must equal 2^K");
    refac::GroupSizes g{std::vector<int>(sizes, sizes + Q)};
    MatrixXd x = L > 0 ? MatrixXd(Eigen::Map<const RowMajor>(X, n, L)) : MatrixXd(n, 0);
    auto d = std::make_unique<refac_design>();
    d->eval = std::make_unique<refac::BalanceEvaluator>(std::move(s), std::move(g), std::move(x),
                                                        criterion->criterion);
    *out = d.release();
  });
}

void refac_design_free(refac_design* d) { delete d; }

int refac_design_effects(const refac_design* d) { return d ? d->eval->structure().F : 0; }

int refac_design_cells(const refac_design* d) { return d ? d->eval->layout().cells() : 0; }

const char* refac_design_effect_label(const refac_design* d, int f) {
  if (!d || f < 0 || f >= d->eval->structure().F) return "";
  return d->eval->structure().labels[f].c_str();
}

refac_status refac_design_thresholds(const refac_design* d, int* dims, double* a, double* p) {
  return guard([&] {
    require(d, "design is NULL");
    const auto& layout = d->eval->layout();
    for (int j = 0; j < layout.cells(); ++j) {
      if (dims) dims[j] = layout.dims[j];
      if (a) a[j] = layout.a[j];
      if (p) p[j] = layout.p[j];
    }
  });
}

double refac_design_acceptance_probability(const refac_design* d) {
  return d ? d->eval->layout().acceptance_probability() : 0.0;
}

const char* refac_design_criterion_name(const refac_design* d) {
  return d ? d->eval->layout().name.c_str() : "";
}

refac_status refac_design_evaluate(const refac_design* d, const int* z, double* tier_stats,
                                   int* accepted) {
  return guard([&] {
    require(d, "design is NULL");
    const auto a = assignment_from(z, d->eval->sizes().total());
    refac::validate_assignment(a, d->eval->sizes());
    const auto report = d->eval->evaluate(a);
    for (std::size_t j = 0; j < report.tier_stats.size() && tier_stats; ++j) {
      tier_stats[j] = report.tier_stats[j];
    }
    if (accepted) *accepted = report.accepted ? 1 : 0;
  });
}

refac_status refac_rerandomize(const refac_design* d, uint64_t seed, uint64_t stream,
                               long long max_draws, int* z_out, double* tier_stats,
                               refac_rerand_info* info) {
  return guard([&] {
    require(d && z_out, "NULL argument");
    auto write = [&](const refac::Assignment& z, const refac::BalanceReport& r) {
      for (std::size_t i = 0; i < z.size(); ++i) z_out[i] = z[i] + 1;
      for (std::size_t j = 0; j < r.tier_stats.size() && tier_stats; ++j) tier_stats[j] = r.tier_stats[j];
    };
    refac::Rng rng(seed, stream);
    try {
      const auto outcome = refac::rerandomize(*d->eval, rng, max_draws);
      write(outcome.assignment, outcome.report);
      if (info) *info = {outcome.draws_attempted, 1, outcome.report.max_ratio()};
    } catch (const refac::MaxDrawsExceeded& e) {
      write(e.best(), e.best_report());
      if (info) *info = {e.draws(), 0, e.best_report().max_ratio()};
      throw;
    }
  });
}

refac_status refac_analyze(const refac_design* d, const double* y, const int* z,
                           refac_analysis** out) {
  return guard([&] {
    require(d && y && out, "NULL argument");
    const int n = d->eval->sizes().total();
    const auto a = assignment_from(z, n);
    auto res = std::make_unique<refac_analysis>();
    res->design = d;
    res->analysis = refac::analyze(Eigen::Map<const VectorXd>(y, n), a, *d->eval);
    *out = res.release();
  });
}

void refac_analysis_free(refac_analysis* a) { delete a; }

refac_status refac_analysis_estimates(const refac_analysis* a, double* tau_hat) {
  return guard([&] {
    require(a && tau_hat, "NULL argument");
    Eigen::Map<VectorXd>(tau_hat, a->analysis.tau_hat.size()) = a->analysis.tau_hat;
  });
}

refac_status refac_analysis_neyman(const refac_analysis* a, double* out) {
  return guard([&] {
    require(a && out, "NULL argument");
    write_matrix(a->analysis.neyman, out);
  });
}

refac_status refac_analysis_vhat_perp(const refac_analysis* a, double* out) {
  return guard([&] {
    require(a && out, "NULL argument");
    write_matrix(a->analysis.vhat_perp, out);
  });
}

refac_status refac_analysis_covariance(const refac_analysis* a, const double* C, int p, double* out) {
  return guard([&] {
    require(a && out, "NULL argument");
    write_matrix(refac::covariance_estimate(contrast(a, C, p), a->analysis.law), out);
  });
}

refac_status refac_analysis_confidence_set(const refac_analysis* a, const double* C, int p,
                                           double alpha, uint64_t seed, long long draws,
                                           int workers, double* center, double* shape,
                                           double* threshold) {
  return guard([&] {
    require(a && center && shape && threshold, "NULL argument");
    const auto cs = refac::confidence_set(a->analysis, contrast(a, C, p), alpha, refac::Rng(seed),
                                          draws, workers);
    Eigen::Map<VectorXd>(center, cs.center.size()) = cs.center;
    write_matrix(cs.shape, shape);
    *threshold = cs.threshold;
  });
}

refac_status refac_analysis_intervals(const refac_analysis* a, double alpha, uint64_t seed,
                                      long long draws, int workers, double* lower, double* upper,
                                      double* threshold) {
  return guard([&] {
    require(a && lower && upper && threshold, "NULL argument");
    const auto iv = refac::effect_intervals(a->analysis, alpha, refac::Rng(seed), draws, workers);
    for (std::size_t f = 0; f < iv.size(); ++f) {
      lower[f] = iv[f].lower;
      upper[f] = iv[f].upper;
      threshold[f] = iv[f].threshold;
    }
  });
}

refac_status refac_simulate(const char* spec_json, const char* designs_json, int reps,
                            uint64_t seed, int workers, long long law_draws, double alpha,
                            refac_report** out) {
  return guard([&] {
    require(out && designs_json, "NULL argument");
    refac::PopulationSpec spec;
    const auto pop = population_from(spec_json, seed, spec);
    const auto s = refac::build_structure(spec.K);
    const auto designs = refac::designs_from_json(designs_json, s);
    refac::ReplicateOptions opt;
    opt.reps = reps;
    opt.workers = workers < 1 ? 1 : workers;
    opt.law_draws = law_draws;
    opt.alpha = alpha;
    const auto report = refac::replicate(pop, spec.K, spec.sizes, designs, opt, seed);
    auto r = std::make_unique<refac_report>();
    r->csv = refac::report_csv(report);
    r->json = refac::report_json(report, false);
    r->json_with_runtime = refac::report_json(report, true);
    *out = r.release();
  });
}

refac_status refac_sweep(const char* spec_json, const char* criterion_json, uint64_t seed,
                         double p_a, const double* p_first, int n_points, refac_report** out) {
  return guard([&] {
    require(out && criterion_json && p_first && n_points >= 1, "NULL argument or empty grid");
    refac::PopulationSpec spec;
    const auto pop = population_from(spec_json, seed, spec);
    const auto s = refac::build_structure(spec.K);
    const auto criterion = refac::criterion_from_json(criterion_json, s);
    const auto curve = refac::tier_tradeoff_sweep(pop, spec.K, spec.sizes, criterion, p_a,
                                                  std::vector<double>(p_first, p_first + n_points));
    auto r = std::make_unique<refac_report>();
    r->csv = refac::tradeoff_csv(curve);
    nlohmann::json j;
    j["schema_version"] = 1;
    j["seed"] = seed;
    j["p_a"] = p_a;
    j["effects"] = curve.labels;
    j["points"] = nlohmann::json::array();
    for (std::size_t i = 0; i < curve.p_first.size(); ++i) {
      std::vector<double> row(curve.priasv.cols());
      for (Eigen::Index f = 0; f < curve.priasv.cols(); ++f) {
        row[f] = curve.priasv(static_cast<Eigen::Index>(i), f);
      }
      j["points"].push_back({{"p_a1", curve.p_first[i]}, {"p_rest", curve.rest[i]}, {"priasv", row}});
    }
    r->json = j.dump(2);
    r->json_with_runtime = r->json;
    *out = r.release();
  });
}

refac_status refac_imbalance(const char* spec_json, uint64_t seed, long long draws, double* fraction,
                             double* se) {
  return guard([&] {
    require(fraction && se, "NULL argument");
    refac::PopulationSpec spec;
    const auto pop = population_from(spec_json, seed, spec);
    const auto s = refac::build_structure(spec.K);
    const auto r = refac::imbalance_fraction(pop.X, s, spec.sizes, draws, refac::Rng(seed, 1));
    *fraction = r.fraction;
    *se = r.se;
  });
}

const char* refac_report_csv(const refac_report* r) { return r ? r->csv.c_str() : ""; }

const char* refac_report_json(refac_report* r, int include_runtime) {
  if (!r) return "";
  return include_runtime ? r->json_with_runtime.c_str() : r->json.c_str();
}

void refac_report_free(refac_report* r) { delete r; }

}  // extern "C"
