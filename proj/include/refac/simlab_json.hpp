#pragma once

#include <string>
#include <vector>

#include "refac/simlab.hpp"

namespace refac {

/// JSON forms used by the command line and the C API. Tier and index lists
/// are 1-based; effects may also be given by label ("1", "1:2", ...).
///
/// criterion: {"type": "crfe"}
///            {"type": "refm", "p": [0.001]}            or "a": [...]
///            {"type": "tiers_f", "effect_tiers": [[1, 2], [3]], "p": [...]}
///            {"type": "tiers_cf", "effect_tiers": ..., "covariate_tiers": [[1], [2]],
///             "grid": "triangular" | [[[t, h], ...], ...], "a": [...]}
BalanceCriterion criterion_from_json(const std::string& text, const FactorialStructure& s);

/// {"K": 2, "sizes": [..] or "equal": n, "covariates": [{"dist": "normal", "mean": 0, "sd": 1},
///  {"dist": "bernoulli", "prob": 0.4}, {"dist": "uniform", "lo": 0, "hi": 1}],
///  "covariate_correlation": 0.1, "outcome": {"intercepts": [...], "beta": [...],
///  "beta_by_group": [[...], ...], "noise_sd": 1, "additive": true,
///  "noise_correlation": 0.5, "clamp": [0, 4]}}
/// The string "education_like" selects the bundled surrogate.
PopulationSpec population_spec_from_json(const std::string& text);

/// [{"name": "refm", "criterion": {...}}, ...]
std::vector<DesignSpec> designs_from_json(const std::string& text, const FactorialStructure& s);

std::string population_spec_to_json(const PopulationSpec& spec);

}  // namespace refac
