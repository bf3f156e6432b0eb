// refac: design, analyze and simulate rerandomized 2^K factorial experiments.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "csv_table.hpp"
#include "refac/refac.h"

namespace {

using nlohmann::json;
using refac_cli::CsvTable;

constexpr int kSchemaVersion = 1;
constexpr int kExitValidation = 2;

/// Carries an exit code out of a subcommand.
struct Failure : std::runtime_error {
  int code;
  Failure(int c, const std::string& m) : std::runtime_error(m), code(c) {}
};

[[noreturn]] void invalid(const std::string& message) { throw Failure(kExitValidation, message); }

void check(refac_status s) {
  if (s == REFAC_OK) return;
  const int code = s == REFAC_ERR_INTERNAL ? 1 : static_cast<int>(s);
  throw Failure(code, refac_last_error());
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Criterion = std::unique_ptr<refac_criterion, Deleter<refac_criterion, refac_criterion_free>>;
using Design = std::unique_ptr<refac_design, Deleter<refac_design, refac_design_free>>;
using Analysis = std::unique_ptr<refac_analysis, Deleter<refac_analysis, refac_analysis_free>>;
using Report = std::unique_ptr<refac_report, Deleter<refac_report, refac_report_free>>;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    invalid(path + " is not valid JSON: " + e.what());
  }
}

json parse_inline_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    invalid(what + " is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) invalid("cannot write " + path);
  out << text;
}

CsvTable load_csv(const std::string& path) {
  try {
    return refac_cli::read_csv(path);
  } catch (const std::runtime_error& e) {
    invalid(e.what());
  }
}

template <class T>
T config_value(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(std::string("config field \"") + key + "\" is missing or has the wrong type");
  }
}

// Flag beats environment (seed only) beats config beats default.
uint64_t resolve_seed(const std::optional<uint64_t>& flag, const json& cfg) {
  if (flag) return *flag;
  if (const char* env = std::getenv("REFAC_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*env == '\0' || *end != '\0') invalid("REFAC_SEED must be an unsigned integer");
    return v;
  }
  if (cfg.contains("seed")) return config_value<uint64_t>(cfg, "seed");
  return 0;
}

template <class T>
T resolve(const std::optional<T>& flag, const json& cfg, const char* key, T fallback) {
  if (flag) return *flag;
  if (cfg.contains(key)) return config_value<T>(cfg, key);
  return fallback;
}

struct DesignInputs {
  int K = 0;
  std::vector<int> sizes;
  json criterion;
};

DesignInputs design_inputs(const json& cfg) {
  DesignInputs in;
  in.K = config_value<int>(cfg, "K");
  if (in.K < 1 || in.K > 20) invalid("K must be between 1 and 20");
  const int Q = 1 << in.K;
  if (cfg.contains("sizes")) {
    in.sizes = config_value<std::vector<int>>(cfg, "sizes");
  } else if (cfg.contains("equal")) {
    const int n = config_value<int>(cfg, "equal");
    if (n <= 0 || n % Q != 0) invalid("\"equal\" must be a positive multiple of " + std::to_string(Q));
    in.sizes.assign(Q, n / Q);
  } else {
    invalid("config needs \"sizes\" or \"equal\"");
  }
  if (static_cast<int>(in.sizes.size()) != Q) {
    invalid("config lists " + std::to_string(in.sizes.size()) + " group sizes, expected " +
            std::to_string(Q));
  }
  in.criterion = cfg.contains("criterion") ? cfg.at("criterion") : json{{"type", "crfe"}};
  return in;
}

/// Covariate columns: the config list, or every column except the unit id
/// and the outcome and assignment columns.
std::vector<int> covariate_columns(const CsvTable& t, const json& cfg,
                                   const std::vector<std::string>& reserved) {
  std::vector<int> cols;
  if (cfg.contains("covariates")) {
    for (const auto& name : config_value<std::vector<std::string>>(cfg, "covariates")) {
      const int c = t.column(name);
      if (c < 0) invalid("covariate column \"" + name + "\" not found");
      cols.push_back(c);
    }
    return cols;
  }
  for (int c = 1; c < static_cast<int>(t.header.size()); ++c) {
    bool skip = false;
    for (const auto& r : reserved) skip = skip || t.header[c] == r;
    if (!skip) cols.push_back(c);
  }
  return cols;
}

struct LoadedDesign {
  DesignInputs inputs;
  CsvTable table;
  std::vector<int> covariate_cols;
  Design design;
  int n = 0;
  int F = 0;
};

LoadedDesign load_design(const json& cfg, const std::string& csv_path,
                         const std::vector<std::string>& reserved) {
  LoadedDesign d;
  d.inputs = design_inputs(cfg);
  d.table = load_csv(csv_path);
  if (d.table.header.empty()) invalid(csv_path + ": no columns");
  d.covariate_cols = covariate_columns(d.table, cfg, reserved);
  d.n = static_cast<int>(d.table.size());
  const int L = static_cast<int>(d.covariate_cols.size());
  std::vector<double> X(static_cast<std::size_t>(d.n) * L);
  for (int i = 0; i < d.n; ++i) {
    for (int l = 0; l < L; ++l) X[static_cast<std::size_t>(i) * L + l] =
        refac_cli::parse_number(d.table, i, d.covariate_cols[l]);
  }
  refac_criterion* c = nullptr;
  check(refac_criterion_from_json(d.inputs.K, d.inputs.criterion.dump().c_str(), &c));
  Criterion crit(c);
  refac_design* raw = nullptr;
  check(refac_design_create(d.inputs.K, d.inputs.sizes.data(), static_cast<int>(d.inputs.sizes.size()),
                            X.data(), d.n, L, crit.get(), &raw));
  d.design.reset(raw);
  d.F = refac_design_effects(raw);
  return d;
}

json resolved_criterion(const LoadedDesign& d) {
  const int J = refac_design_cells(d.design.get());
  std::vector<int> dims(J);
  std::vector<double> a(J), p(J);
  check(refac_design_thresholds(d.design.get(), dims.data(), a.data(), p.data()));
  json j = d.inputs.criterion;
  j["name"] = refac_design_criterion_name(d.design.get());
  j["dims"] = dims;
  json a_out = json::array();
  for (double v : a) a_out.push_back(std::isinf(v) ? json("inf") : json(v));
  j["resolved_a"] = a_out;
  j["resolved_p"] = p;
  j["p_a"] = refac_design_acceptance_probability(d.design.get());
  return j;
}

json effect_labels(const LoadedDesign& d) {
  json labels = json::array();
  for (int f = 0; f < d.F; ++f) labels.push_back(refac_design_effect_label(d.design.get(), f));
  return labels;
}

json covariate_names(const LoadedDesign& d) {
  json names = json::array();
  for (int c : d.covariate_cols) names.push_back(d.table.header[c]);
  return names;
}

json matrix_json(const std::vector<double>& m, int rows, int cols) {
  json out = json::array();
  for (int i = 0; i < rows; ++i) {
    out.push_back(std::vector<double>(m.begin() + static_cast<long>(i) * cols,
                                      m.begin() + static_cast<long>(i + 1) * cols));
  }
  return out;
}

struct DesignArgs {
  std::string config, covariates, out = "-", report;
  std::optional<uint64_t> seed;
  std::optional<long long> max_draws;
};

int cmd_design(const DesignArgs& args) {
  const json cfg = read_json(args.config);
  LoadedDesign d = load_design(cfg, args.covariates, {});
  const uint64_t seed = resolve_seed(args.seed, cfg);
  const long long max_draws = resolve<long long>(args.max_draws, cfg, "max_draws", 0);
  const int J = refac_design_cells(d.design.get());

  std::vector<int> z(d.n);
  std::vector<double> stats(J);
  refac_rerand_info info{};
  const refac_status st =
      refac_rerandomize(d.design.get(), seed, 0, max_draws, z.data(), stats.data(), &info);
  if (st == REFAC_ERR_MAX_DRAWS) {
    std::cerr << "refac: no acceptable assignment within " << info.draws_attempted << " draws\n";
    std::cerr << "refac: best draw has max statistic/threshold ratio "
              << refac_cli::format_double(info.max_ratio) << "; tier statistics";
    for (double s : stats) std::cerr << ' ' << refac_cli::format_double(s);
    std::cerr << "\n";
  }
  check(st);

  std::string csv = d.table.header[0] + ",z\n";
  for (int i = 0; i < d.n; ++i) csv += d.table.rows[i][0] + "," + std::to_string(z[i]) + "\n";
  write_text(args.out, csv);

  json report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = "design";
  report["config"] = {{"K", d.inputs.K},
                      {"sizes", d.inputs.sizes},
                      {"criterion", resolved_criterion(d)},
                      {"covariates", covariate_names(d)},
                      {"seed", seed},
                      {"max_draws", max_draws}};
  report["effects"] = effect_labels(d);
  report["tier_statistics"] = stats;
  report["accepted"] = info.accepted == 1;
  report["draws_attempted"] = info.draws_attempted;
  report["seed"] = seed;
  if (!args.report.empty()) write_text(args.report, report.dump(2) + "\n");
  return 0;
}

struct AnalyzeArgs {
  std::string config, data, contrast, out = "-";
  std::optional<uint64_t> seed;
  std::optional<double> alpha;
  std::optional<long long> draws;
  std::optional<int> workers;
};

int cmd_analyze(const AnalyzeArgs& args) {
  const json cfg = read_json(args.config);
  const std::string y_name = cfg.value("outcome_column", std::string("y"));
  const std::string z_name = cfg.value("assignment_column", std::string("z"));
  LoadedDesign d = load_design(cfg, args.data, {y_name, z_name});
  const int yc = d.table.column(y_name);
  const int zc = d.table.column(z_name);
  if (yc < 0) invalid("outcome column \"" + y_name + "\" not found");
  if (zc < 0) invalid("assignment column \"" + z_name + "\" not found");

  const uint64_t seed = resolve_seed(args.seed, cfg);
  const double alpha = resolve<double>(args.alpha, cfg, "alpha", 0.05);
  const long long draws = resolve<long long>(args.draws, cfg, "draws", 100000);
  const int workers = resolve<int>(args.workers, cfg, "workers", 1);

  std::vector<double> y(d.n);
  std::vector<int> z(d.n);
  const int Q = static_cast<int>(d.inputs.sizes.size());
  std::vector<int> counts(Q, 0);
  for (int i = 0; i < d.n; ++i) {
    y[i] = refac_cli::parse_number(d.table, i, yc);
    z[i] = refac_cli::parse_integer(d.table, i, zc);
    if (z[i] < 1 || z[i] > Q) {
      invalid("line " + std::to_string(d.table.line_numbers[i]) + ": assignment " +
              std::to_string(z[i]) + " is outside 1.." + std::to_string(Q));
    }
    ++counts[z[i] - 1];
  }
  for (int q = 0; q < Q; ++q) {
    if (counts[q] != d.inputs.sizes[q]) {
      invalid("group " + std::to_string(q + 1) + " has " + std::to_string(counts[q]) +
              " units but the config expects " + std::to_string(d.inputs.sizes[q]));
    }
  }

  refac_analysis* raw = nullptr;
  check(refac_analyze(d.design.get(), y.data(), z.data(), &raw));
  Analysis a(raw);
  const int F = d.F;

  std::vector<double> C;
  int p = F;
  if (!args.contrast.empty()) {
    // inline JSON or a file holding it
    const json cj = args.contrast.front() == '[' ? parse_inline_json(args.contrast, "--contrast")
                                                 : read_json(args.contrast);
    if (!cj.is_array() || cj.empty()) invalid("contrast must be a nonempty list of rows");
    p = static_cast<int>(cj.size());
    for (const auto& row : cj) {
      if (!row.is_array() || static_cast<int>(row.size()) != F) {
        invalid("each contrast row needs " + std::to_string(F) + " entries");
      }
      for (const auto& v : row) {
        if (!v.is_number()) invalid("contrast entries must be numbers");
        C.push_back(v.get<double>());
      }
    }
  }
  const double* Cp = C.empty() ? nullptr : C.data();

  std::vector<double> tau(F), cov(static_cast<std::size_t>(F) * F), neyman(cov.size());
  check(refac_analysis_estimates(a.get(), tau.data()));
  check(refac_analysis_covariance(a.get(), nullptr, F, cov.data()));
  check(refac_analysis_neyman(a.get(), neyman.data()));

  std::vector<double> center(p), shape(static_cast<std::size_t>(p) * p);
  double threshold = 0.0;
  const refac_status cs_status = refac_analysis_confidence_set(
      a.get(), Cp, p, alpha, seed, draws, workers, center.data(), shape.data(), &threshold);
  const bool have_set = cs_status == REFAC_OK;
  if (cs_status == REFAC_ERR_NUMERICAL) {
    std::cerr << "refac: warning: no confidence set: " << refac_last_error() << "\n";
  } else {
    check(cs_status);
  }
  std::vector<double> lower(F), upper(F), thr(F);
  check(refac_analysis_intervals(a.get(), alpha, seed, draws, workers, lower.data(), upper.data(),
                                 thr.data()));

  json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = "analyze";
  out["config"] = {{"K", d.inputs.K},        {"sizes", d.inputs.sizes},
                   {"criterion", resolved_criterion(d)},
                   {"covariates", covariate_names(d)},
                   {"outcome_column", y_name}, {"assignment_column", z_name},
                   {"seed", seed},           {"alpha", alpha},
                   {"draws", draws},         {"workers", workers}};
  out["effects"] = effect_labels(d);
  out["tau_hat"] = tau;
  out["covariance"] = matrix_json(cov, F, F);
  out["neyman_covariance"] = matrix_json(neyman, F, F);
  if (have_set) {
    json cs;
    cs["contrast"] = C.empty() ? json("identity") : matrix_json(C, p, F);
    cs["center"] = center;
    cs["shape"] = matrix_json(shape, p, p);
    cs["threshold"] = threshold;
    out["confidence_set"] = cs;
  } else {
    out["confidence_set"] = nullptr;
  }
  json intervals = json::array();
  for (int f = 0; f < F; ++f) {
    intervals.push_back({{"effect", refac_design_effect_label(d.design.get(), f)},
                         {"estimate", tau[f]},
                         {"lower", lower[f]},
                         {"upper", upper[f]},
                         {"threshold", thr[f]}});
  }
  out["intervals"] = intervals;
  write_text(args.out, out.dump(2) + "\n");
  return 0;
}

std::string spec_text(const std::string& spec) {
  if (spec == "education_like") return "\"education_like\"";
  return read_file(spec);
}

struct SimulateArgs {
  std::string spec, designs, csv, json_out;
  std::optional<uint64_t> seed;
  std::optional<int> reps, workers;
  std::optional<long long> draws;
  std::optional<double> alpha;
  bool runtime = false;
};

int cmd_simulate(const SimulateArgs& args) {
  const json none = json::object();
  const uint64_t seed = resolve_seed(args.seed, none);
  const int reps = args.reps.value_or(2000);
  const int workers = args.workers.value_or(1);
  const long long draws = args.draws.value_or(10000);
  const double alpha = args.alpha.value_or(0.05);
  refac_report* raw = nullptr;
  check(refac_simulate(spec_text(args.spec).c_str(), read_file(args.designs).c_str(), reps, seed,
                       workers, draws, alpha, &raw));
  Report r(raw);
  if (!args.csv.empty() || args.json_out.empty()) write_text(args.csv, refac_report_csv(r.get()));
  if (!args.json_out.empty()) {
    write_text(args.json_out, std::string(refac_report_json(r.get(), args.runtime ? 1 : 0)) + "\n");
  }
  return 0;
}

struct ThresholdArgs {
  std::vector<int> dims;
  std::vector<int> tier_sizes;
  int L = 0;
  std::vector<double> a, p;
  bool as_json = false;
};

int cmd_thresholds(const ThresholdArgs& args) {
  std::vector<int> dims = args.dims;
  if (!args.tier_sizes.empty()) {
    if (!dims.empty()) invalid("give either --dims or --L with --tier-sizes");
    if (args.L < 1) invalid("--tier-sizes needs --L");
    for (int s : args.tier_sizes) dims.push_back(args.L * s);
  }
  if (dims.empty()) invalid("no tier dimensions given");
  for (int m : dims) {
    if (m < 1) invalid("tier dimensions must be positive");
  }
  const bool by_a = !args.a.empty();
  if (by_a == !args.p.empty()) invalid("give exactly one of --a or --p");
  const auto& values = by_a ? args.a : args.p;
  if (values.size() != dims.size()) {
    invalid("got " + std::to_string(values.size()) + " values for " + std::to_string(dims.size()) +
            " tiers");
  }
  json rows = json::array();
  std::string csv = "tier,dim,a,p,v\n";
  double p_a = 1.0;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    double a = 0.0, p = 0.0, v = 0.0;
    if (by_a) {
      a = values[j];
      if (!(a > 0.0) || !std::isfinite(a)) invalid("thresholds must be positive and finite");
      check(refac_chisq_cdf(dims[j], a, &p));
    } else {
      p = values[j];
      if (!(p > 0.0 && p < 1.0)) {
        invalid("acceptance probabilities must lie strictly between 0 and 1, got " +
                refac_cli::format_double(p));
      }
      check(refac_chisq_quantile(dims[j], p, &a));
    }
    check(refac_v_constant(dims[j], a, &v));
    p_a *= p;
    csv += std::to_string(j + 1) + "," + std::to_string(dims[j]) + "," +
           refac_cli::format_double(a) + "," + refac_cli::format_double(p) + "," +
           refac_cli::format_double(v) + "\n";
    rows.push_back({{"tier", j + 1}, {"dim", dims[j]}, {"a", a}, {"p", p}, {"v", v}});
  }
  if (args.as_json) {
    json out{{"schema_version", kSchemaVersion},
             {"command", "thresholds"},
             {"config", {{"dims", dims}, {by_a ? "a" : "p", values}}},
             {"tiers", rows},
             {"p_a", p_a}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << csv;
  }
  return 0;
}

struct SweepArgs {
  std::string spec, criterion, csv, json_out;
  std::optional<uint64_t> seed;
  double p_a = 0.001;
  std::vector<double> grid;
  int points = 20;
};

int cmd_sweep(const SweepArgs& args) {
  const uint64_t seed = resolve_seed(args.seed, json::object());
  std::vector<double> grid = args.grid;
  if (grid.empty()) {
    if (args.points < 2) invalid("--points must be at least 2");
    // log-spaced from just above p_a up to 1
    for (int i = 0; i < args.points; ++i) {
      const double t = static_cast<double>(i) / (args.points - 1);
      grid.push_back(std::exp(std::log(args.p_a) * (1.0 - t)));
    }
    grid.front() = args.p_a;
    grid.back() = 1.0;
  }
  refac_report* raw = nullptr;
  check(refac_sweep(spec_text(args.spec).c_str(), read_file(args.criterion).c_str(), seed, args.p_a,
                    grid.data(), static_cast<int>(grid.size()), &raw));
  Report r(raw);
  if (!args.csv.empty() || args.json_out.empty()) write_text(args.csv, refac_report_csv(r.get()));
  if (!args.json_out.empty()) write_text(args.json_out, std::string(refac_report_json(r.get(), 0)) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rerandomized 2^K factorial experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(refac_version()));

  DesignArgs design;
  auto* d = app.add_subcommand("design", "Draw an acceptable assignment for a covariate file");
  d->add_option("--config", design.config, "Design config JSON")->required();
  d->add_option("--covariates", design.covariates, "Covariate CSV (first column is the unit id)")
      ->required();
  d->add_option("--out", design.out, "Assignment CSV (default stdout)");
  d->add_option("--report", design.report, "Balance report JSON");
  d->add_option("--seed", design.seed, "RNG seed (falls back to REFAC_SEED)");
  d->add_option("--max-draws", design.max_draws, "Give up after this many draws");

  AnalyzeArgs analyze;
  auto* a = app.add_subcommand("analyze", "Estimate effects and confidence sets");
  a->add_option("--config", analyze.config, "Design config JSON")->required();
  a->add_option("--data", analyze.data, "CSV with covariates, outcome and assignment")->required();
  a->add_option("--contrast", analyze.contrast, "Contrast rows as inline JSON or a JSON file (default identity)");
  a->add_option("--out", analyze.out, "Estimates JSON (default stdout)");
  a->add_option("--seed", analyze.seed, "RNG seed (falls back to REFAC_SEED)");
  a->add_option("--alpha", analyze.alpha, "Significance level");
  a->add_option("--draws", analyze.draws, "Draws from the asymptotic law");
  a->add_option("--workers", analyze.workers, "Worker threads");

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Replicate designs on a synthetic population");
  s->add_option("--spec", simulate.spec, "Population spec JSON or \"education_like\"")->required();
  s->add_option("--designs", simulate.designs, "JSON list of named criteria")->required();
  s->add_option("--csv", simulate.csv, "Report CSV (default stdout)");
  s->add_option("--json", simulate.json_out, "Report JSON");
  s->add_option("--reps", simulate.reps, "Replications (default 2000)");
  s->add_option("--seed", simulate.seed, "RNG seed (falls back to REFAC_SEED)");
  s->add_option("--workers", simulate.workers, "Worker threads");
  s->add_option("--draws", simulate.draws, "Law draws per replication for coverage (0 skips)");
  s->add_option("--alpha", simulate.alpha, "Significance level for coverage");
  s->add_flag("--runtime", simulate.runtime, "Record wall-clock time in the JSON report");

  ThresholdArgs thresholds;
  auto* t = app.add_subcommand("thresholds", "Convert between thresholds and acceptance probabilities");
  t->add_option("--dims", thresholds.dims, "Chi-square degrees of freedom per tier")->delimiter(',');
  t->add_option("--L", thresholds.L, "Number of covariates");
  t->add_option("--tier-sizes", thresholds.tier_sizes, "Effects per tier (dims = L * size)")
      ->delimiter(',');
  t->add_option("--a", thresholds.a, "Thresholds per tier")->delimiter(',');
  t->add_option("--p", thresholds.p, "Acceptance probabilities per tier")->delimiter(',');
  t->add_flag("--json", thresholds.as_json, "Emit JSON instead of CSV");

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Theoretical PRIASV as the first-tier probability varies");
  w->add_option("--spec", sweep.spec, "Population spec JSON or \"education_like\"")->required();
  w->add_option("--criterion", sweep.criterion, "Tiered criterion JSON")->required();
  w->add_option("--p-a", sweep.p_a, "Overall acceptance probability");
  w->add_option("--grid", sweep.grid, "First-tier probabilities")->delimiter(',');
  w->add_option("--points", sweep.points, "Grid size when --grid is absent");
  w->add_option("--seed", sweep.seed, "Population seed (falls back to REFAC_SEED)");
  w->add_option("--csv", sweep.csv, "Curve CSV (default stdout)");
  w->add_option("--json", sweep.json_out, "Curve JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*d) return cmd_design(design);
    if (*a) return cmd_analyze(analyze);
    if (*s) return cmd_simulate(simulate);
    if (*t) return cmd_thresholds(thresholds);
    if (*w) return cmd_sweep(sweep);
  } catch (const Failure& f) {
    std::cerr << "refac: " << f.what() << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "refac: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
