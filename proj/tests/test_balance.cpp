#include <doctest.h>

#include <cmath>
#include <string>

#include "helpers.hpp"
#include "refac/balance.hpp"
#include "refac/chisq.hpp"
#include "refac/errors.hpp"
#include "refac/rerandomizer.hpp"

using namespace refac;
using testing::max_abs;

namespace {

const auto kProb = ThresholdSpec::Kind::kProbability;
const auto kA = ThresholdSpec::Kind::kThreshold;

struct Fixture {
  FactorialStructure s = build_structure(3);
  GroupSizes g{{6, 9, 5, 8, 7, 6, 10, 9}};
  MatrixXd X;
  Fixture() {
    Rng rng(31);
    X = testing::random_matrix(rng, g.total(), 3);
    X.col(1) += 0.6 * X.col(0);
  }
};

EffectTierPartition effects(std::vector<std::vector<int>> t) {
  EffectTierPartition p;
  p.tiers = std::move(t);
  return p;
}

CovariateTierPartition covariates(std::vector<std::vector<int>> t) {
  CovariateTierPartition p;
  p.tiers = std::move(t);
  return p;
}

}  // namespace

TEST_SUITE("balance") {
  TEST_CASE("ReFM statistic equals the dense Mahalanobis form") {
    Fixture f;
    const BalanceEvaluator ev(f.s, f.g, f.X, Refm{{kProb, {0.3}}});
    const MatrixXd Sxx = finite_population_covariance(f.X);
    const MatrixXd Vxx = kron(b_tilde(f.s, f.g), Sxx);
    const MatrixXd Vinv = Vxx.fullPivLu().inverse();
    const KroneckerSpd factored = vxx(f.s, f.g, Sxx);
    CHECK(max_abs(factored.dense() - Vxx) < 1e-14);
    CHECK(max_abs(factored.inverse_dense() * Vxx - MatrixXd::Identity(21, 21)) < 1e-9);
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
      const Assignment z = draw_crfe(f.g, rng);
      const VectorXd tx = covariate_diff_in_means(f.X, z, f.s);
      const double dense = tx.dot(Vinv * tx);
      CHECK(mahalanobis_refm(tx, factored) == doctest::Approx(dense).epsilon(1e-10));
      const auto report = ev.evaluate(z);
      REQUIRE(report.tier_stats.size() == 1);
      CHECK(report.tier_stats[0] == doctest::Approx(dense).epsilon(1e-10));
    }
  }

  TEST_CASE("tier statistics partition the ReFM statistic") {
    Fixture f;
    const auto p = effects({{0, 1, 2}, {3, 4, 5}, {6}});
    const BalanceEvaluator refm(f.s, f.g, f.X, Refm{{kProb, {0.3}}});
    const BalanceEvaluator tf(f.s, f.g, f.X, TiersF{p, {kProb, {0.1, 0.5, 0.9}}});
    const BalanceEvaluator tcf(f.s, f.g, f.X,
                               TiersCF{p, covariates({{1}, {0, 2}}), TierGrid::triangular(2, 3),
                                       {kProb, {0.1, 0.5}}});
    const auto orth = orthogonalize_effect_coefficients(f.s, f.g, p);
    const SpdFactor Sxx = factor_spd(finite_population_covariance(f.X), "S_xx");
    Rng rng(2);
    for (int k = 0; k < 20; ++k) {
      const Assignment z = draw_crfe(f.g, rng);
      const double M = refm.evaluate(z).tier_stats[0];
      const auto rf = tf.evaluate(z);
      REQUIRE(rf.tier_stats.size() == 3);
      CHECK(rf.tier_stats[0] + rf.tier_stats[1] + rf.tier_stats[2] == doctest::Approx(M).epsilon(1e-10));
      const auto direct = mahalanobis_tiers_f(theta_x(f.X, z, f.s, orth), orth, Sxx);
      for (int h = 0; h < 3; ++h) CHECK(direct[h] == doctest::Approx(rf.tier_stats[h]).epsilon(1e-10));

      const auto rc = tcf.evaluate(z);
      CHECK(rc.cell_stats.sum() == doctest::Approx(M).epsilon(1e-10));
      REQUIRE(rc.tier_stats.size() == 2);
      CHECK(rc.tier_stats[0] == doctest::Approx(rc.cell_stats(0, 0)).epsilon(1e-14));
      // effect tier totals do not depend on how covariates are tiered
      for (int h = 0; h < 3; ++h) {
        CHECK(rc.cell_stats.col(h).sum() == doctest::Approx(rf.tier_stats[h]).epsilon(1e-10));
      }
      const auto standalone =
          mahalanobis_tiers_cf(tcf.covariate_orthogonalization().E, z, f.s, tcf.effects(),
                               tcf.layout().covariates, tcf.layout().grid);
      CHECK(max_abs(standalone.cell_stats - rc.cell_stats) < 1e-10);
    }
  }

  TEST_CASE("the statistic has mean LF under complete randomization") {
    // E[tau_x' V_xx^{-1} tau_x] = trace(I) exactly in the finite population
    Fixture f;
    const BalanceEvaluator ev(f.s, f.g, f.X, Refm{{kProb, {0.5}}});
    Rng rng(3);
    const int draws = 20000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < draws; ++k) {
      const double m = ev.evaluate(draw_crfe(f.g, rng)).tier_stats[0];
      sum += m;
      sq += m * m;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sq / draws - mean * mean) / draws);
    CHECK(std::abs(mean - 21.0) < 4 * se);
  }

  TEST_CASE("thresholds resolve in both parameterizations") {
    Fixture f;
    const BalanceEvaluator byp(f.s, f.g, f.X, Refm{{kProb, {0.05}}});
    CHECK(byp.layout().dims == std::vector<int>{21});
    CHECK(byp.layout().a[0] == doctest::Approx(chisq::quantile(21, 0.05)));
    CHECK(byp.layout().acceptance_probability() == doctest::Approx(0.05));
    const BalanceEvaluator bya(f.s, f.g, f.X, Refm{{kA, {12.0}}});
    CHECK(bya.layout().p[0] == doctest::Approx(chisq::cdf(21, 12.0)));

    const BalanceEvaluator tf(f.s, f.g, f.X, TiersF{effects({{0, 1, 2}, {3, 4, 5, 6}}), {kProb, {0.2, 0.5}}});
    CHECK(tf.layout().dims == std::vector<int>{9, 12});
    CHECK(tf.layout().acceptance_probability() == doctest::Approx(0.1));
  }

  TEST_CASE("invalid criteria are rejected") {
    Fixture f;
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, f.X, Refm{{kProb, {1.0}}}), ValidationError);
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, f.X, Refm{{kProb, {0.0}}}), ValidationError);
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, f.X, Refm{{kA, {-1.0}}}), ValidationError);
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, f.X, Refm{{kA, {INFINITY}}}), ValidationError);
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, f.X, Refm{{kProb, {0.1, 0.2}}}), ValidationError);
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, f.X, TiersF{effects({{0, 1}, {2, 3}}), {kProb, {0.1, 0.2}}}),
                    ValidationError);
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, MatrixXd(f.g.total(), 0), Refm{{kProb, {0.1}}}),
                    ValidationError);
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, f.X.topRows(10), Crfe{}), ValidationError);
    MatrixXd bad = f.X;
    bad(3, 1) = NAN;
    CHECK_THROWS_AS(BalanceEvaluator(f.s, f.g, bad, Crfe{}), ValidationError);
  }

  TEST_CASE("duplicated covariates fail with a numerical error") {
    Fixture f;
    MatrixXd X(f.X.rows(), 2);
    X << f.X.col(0), 2.0 * f.X.col(0);
    try {
      BalanceEvaluator(f.s, f.g, X, Refm{{kProb, {0.1}}});
      FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("degenerate covariates") != std::string::npos);
    }
  }

  TEST_CASE("complete randomization always accepts") {
    Fixture f;
    const BalanceEvaluator none(f.s, f.g, MatrixXd(f.g.total(), 0), Crfe{});
    Rng rng(4);
    const auto r = none.evaluate(draw_crfe(f.g, rng));
    CHECK(r.accepted);
    CHECK(r.tier_stats.empty());
    CHECK(none.layout().cells() == 0);
    const BalanceEvaluator crfe(f.s, f.g, f.X, Crfe{});
    CHECK(crfe.layout().cells() == 1);
    CHECK(std::isinf(crfe.layout().a[0]));
    CHECK(crfe.evaluate(draw_crfe(f.g, rng)).accepted);
    CHECK(crfe.layout().acceptance_probability() == 1.0);
  }

  TEST_CASE("group means reject empty groups and bad labels") {
    const MatrixXd X = MatrixXd::Ones(4, 1);
    CHECK_THROWS_AS(group_means(X, {0, 0, 1, 1}, 3), ValidationError);
    CHECK_THROWS_AS(group_means(X, {0, 0, 1, 5}, 2), ValidationError);
    CHECK_THROWS_AS(group_means(X, {0, 1, 1}, 2), ValidationError);
    CHECK(group_means(X, {0, 1, 1, 0}, 2)(1, 0) == 1.0);
  }
}
