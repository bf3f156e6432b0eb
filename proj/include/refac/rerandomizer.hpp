#pragma once

#include <cstdint>

#include "refac/balance.hpp"
#include "refac/errors.hpp"
#include "refac/rng.hpp"

namespace refac {

inline constexpr long long kMaxDrawsCap = 10'000'000;

/// Uniform draw over assignments with the given group sizes (Fisher-Yates
/// shuffle of the label multiset).
Assignment draw_crfe(const GroupSizes& sizes, Rng& rng);

struct RerandomizationOutcome {
  Assignment assignment;
  long long draws_attempted = 0;
  BalanceReport report;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Raised when no draw passes within the budget. Carries the draw with the
/// smallest max statistic-to-threshold ratio.
class MaxDrawsExceeded : public Error {
 public:
  MaxDrawsExceeded(long long draws, Assignment best, BalanceReport best_report);

  long long draws() const { return draws_; }
  const Assignment& best() const { return best_; }
  const BalanceReport& best_report() const { return best_report_; }

 private:
  long long draws_;
  Assignment best_;
  BalanceReport best_report_;
};

/// ceil(50 / p_a), capped at kMaxDrawsCap.
long long default_max_draws(double p_a);

/// Draws CRFE assignments until one passes the criterion. Pass
/// max_draws <= 0 to use default_max_draws.
RerandomizationOutcome rerandomize(const BalanceEvaluator& design, Rng& rng,
                                   long long max_draws = 0);

}  // namespace refac
