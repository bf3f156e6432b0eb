#include "refac/simlab_json.hpp"

#include <cmath>
#include <json.hpp>

#include "refac/errors.hpp"

namespace refac {

using nlohmann::json;

namespace {

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

template <class T>
T get(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw ValidationError(std::string(what) + " is missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " field \"" + key + "\" has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const char* what) {
  return j.contains(key) ? get<T>(j, key, what) : fallback;
}

int effect_index(const json& v, const FactorialStructure& s) {
  if (v.is_number_integer()) {
    const int f = v.get<int>();
    if (f < 1 || f > s.F) {
      throw ValidationError("effect index " + std::to_string(f) + " is outside 1.." + std::to_string(s.F));
    }
    return f - 1;
  }
  if (v.is_string()) {
    const auto label = v.get<std::string>();
    for (int f = 0; f < s.F; ++f) {
      if (s.labels[f] == label) return f;
    }
    throw ValidationError("unknown effect label \"" + label + "\"");
  }
  throw ValidationError("effect tiers must hold 1-based indices or labels");
}

TierPartition index_tiers(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be a list of lists");
  TierPartition p;
  for (const auto& tier : j) {
    if (!tier.is_array()) throw ValidationError(std::string(what) + " must be a list of lists");
    p.tiers.emplace_back();
    for (const auto& v : tier) {
      if (!v.is_number_integer()) throw ValidationError(std::string(what) + " must hold integers");
      p.tiers.back().push_back(v.get<int>() - 1);
    }
  }
  return p;
}

ThresholdSpec thresholds(const json& j) {
  const bool has_a = j.contains("a");
  const bool has_p = j.contains("p");
  if (has_a == has_p) throw ValidationError("criterion needs exactly one of \"a\" or \"p\"");
  ThresholdSpec spec;
  spec.kind = has_a ? ThresholdSpec::Kind::kThreshold : ThresholdSpec::Kind::kProbability;
  spec.values = get<std::vector<double>>(j, has_a ? "a" : "p", "criterion");
  return spec;
}

BalanceCriterion criterion_from(const json& j, const FactorialStructure& s) {
  if (!j.is_object()) throw ValidationError("criterion must be a JSON object");
  const auto type = get<std::string>(j, "type", "criterion");
  if (type == "crfe") return Crfe{};
  if (type == "refm") return Refm{thresholds(j)};
  auto effects = [&] {
    if (!j.contains("effect_tiers")) throw ValidationError(type + " needs \"effect_tiers\"");
    EffectTierPartition p;
    for (const auto& tier : j.at("effect_tiers")) {
      if (!tier.is_array()) throw ValidationError("effect_tiers must be a list of lists");
      p.tiers.emplace_back();
      for (const auto& v : tier) p.tiers.back().push_back(effect_index(v, s));
    }
    return p;
  };
  if (type == "tiers_f") return TiersF{effects(), thresholds(j)};
  if (type == "tiers_cf") {
    TiersCF c;
    c.effects = effects();
    if (!j.contains("covariate_tiers")) throw ValidationError("tiers_cf needs \"covariate_tiers\"");
    static_cast<TierPartition&>(c.covariates) = index_tiers(j.at("covariate_tiers"), "covariate_tiers");
    const json grid = j.contains("grid") ? j.at("grid") : json("triangular");
    if (grid.is_string()) {
      if (grid.get<std::string>() != "triangular") {
        throw ValidationError("grid must be \"triangular\" or an explicit list of cells");
      }
      c.grid = TierGrid::triangular(c.covariates.count(), c.effects.count());
    } else {
      for (const auto& cell : grid) {
        c.grid.cells.emplace_back();
        for (const auto& pair : cell) {
          if (!pair.is_array() || pair.size() != 2) {
            throw ValidationError("grid cells must hold [covariate tier, effect tier] pairs");
          }
          c.grid.cells.back().emplace_back(pair[0].get<int>() - 1, pair[1].get<int>() - 1);
        }
      }
    }
    c.thresholds = thresholds(j);
    return c;
  }
  throw ValidationError("unknown criterion type \"" + type + "\"");
}

CovariateRecipe covariate_from(const json& j, int index) {
  const std::string what = "covariate " + std::to_string(index + 1);
  if (!j.is_object()) throw ValidationError(what + " must be an object");
  CovariateRecipe c;
  const auto dist = get<std::string>(j, "dist", what.c_str());
  if (dist == "normal") {
    c.kind = CovariateRecipe::Kind::kNormal;
    c.mean = get_or(j, "mean", 0.0, what.c_str());
    c.sd = get_or(j, "sd", 1.0, what.c_str());
  } else if (dist == "bernoulli") {
    c.kind = CovariateRecipe::Kind::kBernoulli;
    c.prob = get_or(j, "prob", 0.5, what.c_str());
  } else if (dist == "uniform") {
    c.kind = CovariateRecipe::Kind::kUniform;
    c.lo = get_or(j, "lo", 0.0, what.c_str());
    c.hi = get_or(j, "hi", 1.0, what.c_str());
  } else {
    throw ValidationError(what + ": unknown dist \"" + dist + "\"");
  }
  return c;
}

}  // namespace

BalanceCriterion criterion_from_json(const std::string& text, const FactorialStructure& s) {
  return criterion_from(parse(text, "criterion"), s);
}

PopulationSpec population_spec_from_json(const std::string& text) {
  const json j = parse(text, "population spec");
  if (j.is_string()) {
    if (j.get<std::string>() == "education_like") return education_like_spec();
    throw ValidationError("unknown bundled population \"" + j.get<std::string>() + "\"");
  }
  if (!j.is_object()) throw ValidationError("population spec must be a JSON object");
  PopulationSpec spec;
  spec.K = get<int>(j, "K", "population spec");
  const int Q = spec.K >= 1 && spec.K <= kMaxFactors ? 1 << spec.K : 0;
  if (Q == 0) throw ValidationError("K must be in 1.." + std::to_string(kMaxFactors));
  if (j.contains("sizes")) {
    spec.sizes.n_q = get<std::vector<int>>(j, "sizes", "population spec");
  } else if (j.contains("equal")) {
    spec.sizes = equal_sizes(Q, get<int>(j, "equal", "population spec"));
  } else {
    throw ValidationError("population spec needs \"sizes\" or \"equal\"");
  }
  if (j.contains("covariates")) {
    int i = 0;
    for (const auto& c : j.at("covariates")) spec.covariates.push_back(covariate_from(c, i++));
  }
  spec.covariate_correlation = get_or(j, "covariate_correlation", 0.0, "population spec");
  if (!j.contains("outcome")) throw ValidationError("population spec needs \"outcome\"");
  const json& o = j.at("outcome");
  auto& out = spec.outcome;
  out.intercepts = get_or(o, "intercepts", std::vector<double>(Q, 0.0), "outcome");
  out.beta = get_or(o, "beta", std::vector<double>(spec.covariates.size(), 0.0), "outcome");
  out.beta_by_group = get_or(o, "beta_by_group", std::vector<std::vector<double>>{}, "outcome");
  out.noise_sd = get_or(o, "noise_sd", 1.0, "outcome");
  out.additive = get_or(o, "additive", true, "outcome");
  out.noise_correlation = get_or(o, "noise_correlation", 0.0, "outcome");
  if (o.contains("clamp")) {
    const auto range = get<std::vector<double>>(o, "clamp", "outcome");
    if (range.size() != 2) throw ValidationError("clamp must be [lo, hi]");
    out.clamp = std::make_pair(range[0], range[1]);
  }
  validate_spec(spec);
  return spec;
}

std::vector<DesignSpec> designs_from_json(const std::string& text, const FactorialStructure& s) {
  const json j = parse(text, "design list");
  if (!j.is_array() || j.empty()) throw ValidationError("design list must be a nonempty JSON array");
  std::vector<DesignSpec> out;
  for (const auto& d : j) {
    if (!d.is_object()) throw ValidationError("each design must be an object");
    DesignSpec spec;
    spec.name = get<std::string>(d, "name", "design");
    if (spec.name.empty() || spec.name.find_first_of(",\"\n") != std::string::npos) {
      throw ValidationError("design names must be nonempty and free of commas, quotes and newlines");
    }
    if (!d.contains("criterion")) throw ValidationError("design \"" + spec.name + "\" needs a criterion");
    spec.criterion = criterion_from(d.at("criterion"), s);
    out.push_back(std::move(spec));
  }
  return out;
}

std::string population_spec_to_json(const PopulationSpec& spec) {
  json j;
  j["K"] = spec.K;
  j["sizes"] = spec.sizes.n_q;
  j["covariates"] = json::array();
  for (const auto& c : spec.covariates) {
    switch (c.kind) {
      case CovariateRecipe::Kind::kNormal:
        j["covariates"].push_back({{"dist", "normal"}, {"mean", c.mean}, {"sd", c.sd}});
        break;
      case CovariateRecipe::Kind::kBernoulli:
        j["covariates"].push_back({{"dist", "bernoulli"}, {"prob", c.prob}});
        break;
      case CovariateRecipe::Kind::kUniform:
        j["covariates"].push_back({{"dist", "uniform"}, {"lo", c.lo}, {"hi", c.hi}});
        break;
    }
  }
  j["covariate_correlation"] = spec.covariate_correlation;
  const auto& o = spec.outcome;
  json out = {{"intercepts", o.intercepts}, {"beta", o.beta},     {"noise_sd", o.noise_sd},
              {"additive", o.additive},     {"noise_correlation", o.noise_correlation}};
  if (!o.beta_by_group.empty()) out["beta_by_group"] = o.beta_by_group;
  if (o.clamp) out["clamp"] = {o.clamp->first, o.clamp->second};
  j["outcome"] = out;
  return j.dump(2);
}

std::string report_json(const ReplicationReport& r, bool include_runtime) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["schema_version"] = r.schema_version;
  j["reps"] = r.reps;
  j["seed"] = r.seed;
  j["workers"] = r.workers;
  j["n"] = r.n;
  j["K"] = r.K;
  j["L"] = r.L;
  j["alpha"] = r.alpha;
  j["law_draws"] = r.law_draws;
  j["designs"] = json::array();
  for (const auto& d : r.designs) {
    json dj;
    dj["name"] = d.name;
    dj["criterion"] = d.criterion;
    dj["dims"] = d.dims;
    dj["thresholds"] = json::array();
    for (double a : d.thresholds) dj["thresholds"].push_back(num(a));
    dj["probabilities"] = d.probabilities;
    dj["p_a"] = d.p_a;
    dj["acceptance_rate"] = {{"value", d.acceptance_rate}, {"se", d.acceptance_rate_se}};
    dj["mean_draws"] = d.mean_draws;
    if (d.has_inference) {
      dj["coverage"] = {{"value", d.coverage}, {"se", d.coverage_se}};
      dj["mean_log_volume"] = {{"value", d.mean_log_volume}, {"se", d.mean_log_volume_se}};
    }
    dj["effects"] = json::array();
    for (const auto& e : d.effects) {
      dj["effects"].push_back(
          {{"effect", e.label},
           {"tau", e.tau},
           {"R2", e.R2},
           {"crfe_variance", e.crfe_variance},
           {"variance", {{"value", e.variance}, {"se", e.variance_se}}},
           {"priasv", {{"value", e.priasv}, {"se", e.priasv_se}, {"theory", e.priasv_theory}}},
           {"range_reduction",
            {{"value", e.range_reduction}, {"se", e.range_reduction_se}, {"theory", e.range_reduction_theory}}}});
    }
    j["designs"].push_back(dj);
  }
  if (include_runtime) j["runtime_seconds"] = r.runtime_seconds;
  return j.dump(2);
}

}  // namespace refac
