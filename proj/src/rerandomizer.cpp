#include "refac/rerandomizer.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace refac {

Assignment draw_crfe(const GroupSizes& sizes, Rng& rng) {
  Assignment z;
  z.reserve(sizes.total());
  for (int q = 0; q < sizes.Q(); ++q) {
    if (sizes.n_q[q] < 2) {
      throw ValidationError("group " + std::to_string(q + 1) + " needs at least 2 units");
    }
    z.insert(z.end(), sizes.n_q[q], q);
  }
  for (std::size_t i = z.size(); i > 1; --i) {
    const std::uint32_t j = rng.below(static_cast<std::uint32_t>(i));
    std::swap(z[i - 1], z[j]);
  }
  return z;
}

MaxDrawsExceeded::MaxDrawsExceeded(long long draws, Assignment best, BalanceReport best_report)
    : Error("no assignment passed the balance criterion in " + std::to_string(draws) +
            " draws (closest max statistic/threshold ratio " +
            std::to_string(best_report.max_ratio()) + ")"),
      draws_(draws),
      best_(std::move(best)),
      best_report_(std::move(best_report)) {}

long long default_max_draws(double p_a) {
  if (!(p_a > 0.0)) return kMaxDrawsCap;
  const double raw = std::ceil(50.0 / p_a);
  return raw >= static_cast<double>(kMaxDrawsCap) ? kMaxDrawsCap : static_cast<long long>(raw);
}

RerandomizationOutcome rerandomize(const BalanceEvaluator& design, Rng& rng, long long max_draws) {
  if (max_draws <= 0) max_draws = default_max_draws(design.layout().acceptance_probability());
  RerandomizationOutcome out;
  out.seed = rng.seed();
  out.stream = rng.stream();
  Assignment best;
  BalanceReport best_report;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (long long draw = 1; draw <= max_draws; ++draw) {
    Assignment z = draw_crfe(design.sizes(), rng);
    BalanceReport report = design.evaluate(z);
    if (report.accepted) {
      out.assignment = std::move(z);
      out.report = std::move(report);
      out.draws_attempted = draw;
      return out;
    }
    const double ratio = report.max_ratio();
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = std::move(z);
      best_report = std::move(report);
    }
  }
  throw MaxDrawsExceeded(max_draws, std::move(best), std::move(best_report));
}

}  // namespace refac
