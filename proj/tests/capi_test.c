/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "refac/refac.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__,     \
              __LINE__, #cond);                                        \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

/* small deterministic generator for test data */
static double lcg_normal(unsigned long long* s) {
  double u = 0.0;
  for (int i = 0; i < 12; ++i) {
    *s = *s * 6364136223846793005ULL + 1442695040888963407ULL;
    u += (double)(*s >> 11) / 9007199254740992.0;
  }
  return u - 6.0;
}

static void test_chisq(void) {
  double v = 0.0;
  EXPECT(refac_chisq_cdf(2.0, 2.0, &v) == REFAC_OK);
  EXPECT(fabs(v - (1.0 - exp(-1.0))) < 1e-12);
  EXPECT(refac_chisq_quantile(2.0, 1.0 - exp(-1.0), &v) == REFAC_OK);
  EXPECT(fabs(v - 2.0) < 1e-9);
  EXPECT(refac_chisq_quantile(2.0, 1.0, &v) == REFAC_ERR_VALIDATION);
  EXPECT(strlen(refac_last_error()) > 0);
  EXPECT(refac_v_constant(3, 1e9, &v) == REFAC_OK);
  EXPECT(fabs(v - 1.0) < 1e-9);
  EXPECT(refac_v_constant(0, 1.0, &v) == REFAC_ERR_VALIDATION);
}

static void test_criteria(void) {
  refac_criterion* c = NULL;
  EXPECT(refac_criterion_refm(REFAC_THRESHOLD_P, 1.5, &c) == REFAC_OK);
  refac_criterion_free(c);
  c = NULL;
  EXPECT(refac_criterion_from_json(2, "{\"type\":\"nope\"}", &c) == REFAC_ERR_VALIDATION);
  EXPECT(c == NULL);
  EXPECT(strstr(refac_last_error(), "nope") != NULL);
  EXPECT(refac_criterion_from_json(2, "{\"type\":\"refm\",\"p\":[0.2]}", NULL) ==
         REFAC_ERR_VALIDATION);
  int tiers[3] = {1, 1, 2};
  double p[2] = {0.1, 0.5};
  EXPECT(refac_criterion_tiers_f(3, tiers, REFAC_THRESHOLD_P, p, 2, &c) == REFAC_OK);
  refac_criterion_free(c);
  int bad[3] = {1, 3, 3};
  c = NULL;
  EXPECT(refac_criterion_tiers_f(3, bad, REFAC_THRESHOLD_P, p, 2, &c) == REFAC_ERR_VALIDATION);
  refac_criterion_free(NULL);
}

static void test_end_to_end(void) {
  enum { K = 2, Q = 4, N = 80, L = 2 };
  int sizes[Q] = {20, 20, 20, 20};
  double X[N * L];
  double y[N];
  unsigned long long s = 42;
  for (int i = 0; i < N * L; ++i) X[i] = lcg_normal(&s);

  refac_criterion* crit = NULL;
  EXPECT(refac_criterion_from_json(
             K, "{\"type\":\"tiers_f\",\"effect_tiers\":[[\"1\",\"2\"],[\"1:2\"]],\"p\":[0.2,0.5]}",
             &crit) == REFAC_OK);
  refac_design* d = NULL;
  EXPECT(refac_design_create(K, sizes, 3, X, N, L, crit, &d) == REFAC_ERR_VALIDATION);
  EXPECT(refac_design_create(K, sizes, Q, X, N, L, crit, &d) == REFAC_OK);
  refac_criterion_free(crit);
  if (!d) return;

  EXPECT(refac_design_effects(d) == 3);
  EXPECT(refac_design_cells(d) == 2);
  EXPECT(strcmp(refac_design_effect_label(d, 2), "1:2") == 0);
  EXPECT(strcmp(refac_design_criterion_name(d), "tiers_f") == 0);
  EXPECT(fabs(refac_design_acceptance_probability(d) - 0.1) < 1e-9);
  int dims[2];
  double a[2], pp[2];
  EXPECT(refac_design_thresholds(d, dims, a, pp) == REFAC_OK);
  EXPECT(dims[0] == 4 && dims[1] == 2);
  EXPECT(fabs(pp[0] - 0.2) < 1e-12);

  int z[N];
  double stats[2];
  refac_rerand_info info;
  EXPECT(refac_rerandomize(d, 7, 0, 0, z, stats, &info) == REFAC_OK);
  EXPECT(info.accepted == 1);
  EXPECT(info.draws_attempted >= 1);
  EXPECT(stats[0] <= a[0] && stats[1] <= a[1]);
  int counts[Q] = {0, 0, 0, 0};
  for (int i = 0; i < N; ++i) {
    EXPECT(z[i] >= 1 && z[i] <= Q);
    if (z[i] >= 1 && z[i] <= Q) ++counts[z[i] - 1];
  }
  for (int q = 0; q < Q; ++q) EXPECT(counts[q] == 20);

  double again[2];
  int accepted = 0;
  EXPECT(refac_design_evaluate(d, z, again, &accepted) == REFAC_OK);
  EXPECT(accepted == 1);
  EXPECT(fabs(again[0] - stats[0]) < 1e-12);

  int z2[N];
  refac_rerand_info info2;
  EXPECT(refac_rerandomize(d, 7, 0, 0, z2, NULL, &info2) == REFAC_OK);
  EXPECT(memcmp(z, z2, sizeof z) == 0);
  EXPECT(refac_rerandomize(d, 7, 1, 0, z2, NULL, &info2) == REFAC_OK);
  EXPECT(memcmp(z, z2, sizeof z) != 0);

  /* outcome with a known main effect of factor 1 */
  const double shift[Q] = {0.0, 0.0, 1.0, 1.0};
  for (int i = 0; i < N; ++i) y[i] = X[i * L] + shift[z[i] - 1] + 0.3 * lcg_normal(&s);

  refac_analysis* an = NULL;
  EXPECT(refac_analyze(d, y, z, &an) == REFAC_OK);
  double tau[3], V[9], lo[3], hi[3], thr[3];
  EXPECT(refac_analysis_estimates(an, tau) == REFAC_OK);
  EXPECT(fabs(tau[0] - 1.0) < 0.6);
  EXPECT(refac_analysis_neyman(an, V) == REFAC_OK);
  EXPECT(V[0] > 0 && fabs(V[1] - V[3]) < 1e-12);
  EXPECT(refac_analysis_intervals(an, 0.05, 3, 10000, 1, lo, hi, thr) == REFAC_OK);
  for (int f = 0; f < 3; ++f) EXPECT(lo[f] < tau[f] && tau[f] < hi[f]);
  EXPECT(refac_analysis_intervals(an, 0.05, 3, 500, 1, lo, hi, thr) == REFAC_ERR_VALIDATION);
  double center[3], shape[9], t = 0.0;
  EXPECT(refac_analysis_confidence_set(an, NULL, 3, 0.05, 3, 10000, 2, center, shape, &t) ==
         REFAC_OK);
  EXPECT(t > 0.0);
  refac_analysis_free(an);

  int wrong[N];
  memcpy(wrong, z, sizeof z);
  wrong[0] = 9;
  an = NULL;
  EXPECT(refac_analyze(d, y, wrong, &an) == REFAC_ERR_VALIDATION);
  EXPECT(an == NULL);
  refac_design_free(d);
}

static void test_max_draws(void) {
  enum { N = 8 };
  int sizes[2] = {4, 4};
  double X[N] = {0.1, -0.4, 1.3, 0.7, -1.1, 0.2, 2.0, -0.6};
  refac_criterion* c = NULL;
  EXPECT(refac_criterion_refm(REFAC_THRESHOLD_A, 1e-9, &c) == REFAC_OK);
  refac_design* d = NULL;
  EXPECT(refac_design_create(1, sizes, 2, X, N, 1, c, &d) == REFAC_OK);
  refac_criterion_free(c);
  int z[N];
  refac_rerand_info info;
  EXPECT(refac_rerandomize(d, 1, 0, 20, z, NULL, &info) == REFAC_ERR_MAX_DRAWS);
  EXPECT(info.draws_attempted == 20);
  EXPECT(info.accepted == 0);
  EXPECT(info.max_ratio > 1.0);
  EXPECT(strstr(refac_last_error(), "20") != NULL);
  refac_design_free(d);

  double dup[N * 2];
  for (int i = 0; i < N; ++i) dup[2 * i] = dup[2 * i + 1] = X[i];
  EXPECT(refac_criterion_refm(REFAC_THRESHOLD_P, 0.5, &c) == REFAC_OK);
  d = NULL;
  EXPECT(refac_design_create(1, sizes, 2, dup, N, 2, c, &d) == REFAC_ERR_NUMERICAL);
  refac_criterion_free(c);
}

static void test_simulate(void) {
  const char* spec =
      "{\"K\":1,\"equal\":100,\"covariates\":[{\"dist\":\"normal\"}],"
      "\"outcome\":{\"intercepts\":[0,1],\"beta\":[1],\"noise_sd\":1}}";
  const char* designs =
      "[{\"name\":\"crfe\",\"criterion\":{\"type\":\"crfe\"}},"
      "{\"name\":\"refm\",\"criterion\":{\"type\":\"refm\",\"p\":[0.1]}}]";
  refac_report* r = NULL;
  EXPECT(refac_simulate(spec, designs, 99, 1, 1, 0, 0.05, &r) == REFAC_ERR_VALIDATION);
  EXPECT(refac_simulate(spec, designs, 100, 1, 2, 0, 0.05, &r) == REFAC_OK);
  if (r) {
    EXPECT(strncmp(refac_report_csv(r), "design,", 7) == 0);
    EXPECT(strstr(refac_report_json(r, 0), "runtime") == NULL);
    EXPECT(strstr(refac_report_json(r, 1), "runtime") != NULL);
    refac_report_free(r);
  }
  double f = 0.0, se = 0.0;
  EXPECT(refac_imbalance(spec, 3, 10000, &f, &se) == REFAC_OK);
  EXPECT(fabs(f - 0.05) < 5 * se + 0.01);
}

int main(void) {
  EXPECT(strlen(refac_version()) > 0);
  test_chisq();
  test_criteria();
  test_end_to_end();
  test_max_draws();
  test_simulate();
  if (failures) {
    fprintf(stderr, "%d expectation(s) failed\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
