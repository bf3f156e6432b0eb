#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>

#include "helpers.hpp"
#include "refac/errors.hpp"
#include "refac/rerandomizer.hpp"

using namespace refac;

namespace {
const auto kProb = ThresholdSpec::Kind::kProbability;

BalanceEvaluator small_design(const BalanceCriterion& c) {
  Rng rng(41);
  const GroupSizes g{{25, 25, 25, 25}};
  return BalanceEvaluator(build_structure(2), g, testing::random_matrix(rng, 100, 2), c);
}
}  // namespace

TEST_SUITE("rerandomizer") {
  TEST_CASE("complete randomization keeps group sizes and is uniform") {
    const GroupSizes g{{2, 2}};
    Rng rng(1);
    std::map<Assignment, int> counts;
    const int draws = 60000;
    for (int k = 0; k < draws; ++k) {
      const Assignment z = draw_crfe(g, rng);
      REQUIRE(group_counts(z, 2) == std::vector<int>{2, 2});
      ++counts[z];
    }
    REQUIRE(counts.size() == 6);
    double stat = 0.0;
    for (const auto& [z, c] : counts) stat += (c - draws / 6.0) * (c - draws / 6.0) / (draws / 6.0);
    CHECK(stat < boost::math::quantile(boost::math::chi_squared(5), 0.999));
  }

  TEST_CASE("complete randomization takes a single draw") {
    const auto d = small_design(Crfe{});
    Rng rng(2);
    const auto out = rerandomize(d, rng);
    CHECK(out.draws_attempted == 1);
    CHECK(out.report.accepted);
  }

  TEST_CASE("accepted assignments satisfy every threshold") {
    EffectTierPartition p;
    p.tiers = {{0, 1}, {2}};
    const auto d = small_design(TiersF{p, {kProb, {0.05, 0.5}}});
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
      const auto out = rerandomize(d, rng);
      REQUIRE(out.report.accepted);
      for (int j = 0; j < 2; ++j) CHECK(out.report.tier_stats[j] <= d.layout().a[j]);
      CHECK(d.evaluate(out.assignment).tier_stats == out.report.tier_stats);
    }
  }

  TEST_CASE("identical seeds give identical outcomes") {
    const auto d = small_design(Refm{{kProb, {0.1}}});
    Rng a(77, 3), b(77, 3);
    const auto x = rerandomize(d, a);
    const auto y = rerandomize(d, b);
    CHECK(x.assignment == y.assignment);
    CHECK(x.draws_attempted == y.draws_attempted);
    CHECK(x.seed == 77);
    CHECK(x.stream == 3);
  }

  TEST_CASE("mean number of draws is about one over the acceptance probability") {
    const auto d = small_design(Refm{{kProb, {0.2}}});
    Rng rng(5);
    const int runs = 2000;
    double total = 0.0;
    for (int k = 0; k < runs; ++k) total += rerandomize(d, rng).draws_attempted;
    const double rate = runs / total;
    // normal approximation for a geometric sample; the finite population
    // acceptance rate differs from p_a by O(1/sqrt(n)), hence the wide band
    CHECK(std::abs(rate - 0.2) < 0.03);
  }

  TEST_CASE("exhausting the draw budget reports the best draw") {
    const auto d = small_design(Refm{{kProb, {1e-9}}});
    Rng rng(6);
    try {
      rerandomize(d, rng, 25);
      FAIL("expected MaxDrawsExceeded");
    } catch (const MaxDrawsExceeded& e) {
      CHECK(e.draws() == 25);
      CHECK(e.best().size() == 100);
      CHECK(e.best_report().max_ratio() > 1.0);
      CHECK(d.evaluate(e.best()).tier_stats == e.best_report().tier_stats);
    }
  }

  TEST_CASE("default budget scales with the acceptance probability") {
    CHECK(default_max_draws(0.001) == 50000);
    CHECK(default_max_draws(1.0) == 50);
    CHECK(default_max_draws(1e-12) == kMaxDrawsCap);
  }
}
