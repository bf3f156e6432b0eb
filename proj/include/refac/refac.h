/* C interface to the rerandomized factorial design library.
 *
 * Every call returns a refac_status. On failure the message for the calling
 * thread is available from refac_last_error() until the next failing call.
 * Handles are opaque; free each with its matching *_free function.
 * Indices cross this boundary 1-based (treatments, tiers, effects). */
#ifndef REFAC_REFAC_H
#define REFAC_REFAC_H

#include <stddef.h>
#include <stdint.h>

#if defined(REFAC_BUILDING_LIBRARY)
#define REFAC_API __attribute__((visibility("default")))
#else
#define REFAC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum refac_status {
  REFAC_OK = 0,
  REFAC_ERR_VALIDATION = 2,
  REFAC_ERR_MAX_DRAWS = 3,
  REFAC_ERR_NUMERICAL = 4,
  REFAC_ERR_INTERNAL = 5
} refac_status;

typedef enum refac_threshold_kind {
  REFAC_THRESHOLD_A = 0, /* values are chi-square thresholds a */
  REFAC_THRESHOLD_P = 1  /* values are per-tier acceptance probabilities */
} refac_threshold_kind;

typedef struct refac_criterion refac_criterion;
typedef struct refac_design refac_design;
typedef struct refac_analysis refac_analysis;
typedef struct refac_report refac_report;

REFAC_API const char* refac_version(void);
REFAC_API const char* refac_last_error(void);

/* ---- chi-square helpers ---- */
REFAC_API refac_status refac_chisq_cdf(double dof, double x, double* out);
REFAC_API refac_status refac_chisq_quantile(double dof, double p, double* out);
REFAC_API refac_status refac_v_constant(int m, double a, double* out);

/* ---- balance criteria ---- */
REFAC_API refac_status refac_criterion_crfe(refac_criterion** out);
REFAC_API refac_status refac_criterion_refm(refac_threshold_kind kind, double value,
                                            refac_criterion** out);
/* effect_tier[f] is the 1-based tier of effect f (length F). */
REFAC_API refac_status refac_criterion_tiers_f(int F, const int* effect_tier,
                                               refac_threshold_kind kind, const double* values,
                                               int n_values, refac_criterion** out);
/* covariate_tier[l] is the 1-based tier of covariate l (length L);
 * cell_of[(t - 1) * H + (h - 1)] is the 1-based grid cell of pair (t, h), or
 * pass NULL for triangular tiers. */
REFAC_API refac_status refac_criterion_tiers_cf(int F, const int* effect_tier, int L,
                                                const int* covariate_tier, const int* cell_of,
                                                refac_threshold_kind kind, const double* values,
                                                int n_values, refac_criterion** out);
/* Criterion from its JSON form; needs K to resolve effect labels. */
REFAC_API refac_status refac_criterion_from_json(int K, const char* json, refac_criterion** out);
REFAC_API void refac_criterion_free(refac_criterion* c);

/* ---- designs ---- */
/* X is n x L row-major. The criterion is copied. */
REFAC_API refac_status refac_design_create(int K, const int* sizes, int Q, const double* X,
                                           int n, int L, const refac_criterion* criterion,
                                           refac_design** out);
REFAC_API void refac_design_free(refac_design* d);
REFAC_API int refac_design_effects(const refac_design* d);
REFAC_API int refac_design_cells(const refac_design* d);
/* Label of effect f (0-based position), e.g. "1:2". */
REFAC_API const char* refac_design_effect_label(const refac_design* d, int f);
/* Writes cells() values to each non-NULL output. */
REFAC_API refac_status refac_design_thresholds(const refac_design* d, int* dims, double* a,
                                               double* p);
REFAC_API double refac_design_acceptance_probability(const refac_design* d);
REFAC_API const char* refac_design_criterion_name(const refac_design* d);

/* Balance statistics of an assignment z (length n, values 1..Q). tier_stats
 * receives cells() values; accepted may be NULL. */
REFAC_API refac_status refac_design_evaluate(const refac_design* d, const int* z,
                                             double* tier_stats, int* accepted);

typedef struct refac_rerand_info {
  long long draws_attempted;
  int accepted;
  double max_ratio; /* best ratio seen when REFAC_ERR_MAX_DRAWS */
} refac_rerand_info;

/* max_draws <= 0 selects ceil(50 / p_a) capped at 1e7. On
 * REFAC_ERR_MAX_DRAWS, z_out and tier_stats hold the closest draw. */
REFAC_API refac_status refac_rerandomize(const refac_design* d, uint64_t seed, uint64_t stream,
                                         long long max_draws, int* z_out, double* tier_stats,
                                         refac_rerand_info* info);

/* ---- analysis ---- */
REFAC_API refac_status refac_analyze(const refac_design* d, const double* y, const int* z,
                                     refac_analysis** out);
REFAC_API void refac_analysis_free(refac_analysis* a);
REFAC_API refac_status refac_analysis_estimates(const refac_analysis* a, double* tau_hat);
/* F x F row-major matrices. */
REFAC_API refac_status refac_analysis_neyman(const refac_analysis* a, double* out);
REFAC_API refac_status refac_analysis_vhat_perp(const refac_analysis* a, double* out);
/* C is p x F row-major (NULL with p = F for the identity). Writes the
 * p x p covariance estimate C V C' + sum v C coef coef' C'. */
REFAC_API refac_status refac_analysis_covariance(const refac_analysis* a, const double* C, int p,
                                                 double* out);
/* Confidence set for C tau: center (p), shape (p x p), threshold. */
REFAC_API refac_status refac_analysis_confidence_set(const refac_analysis* a, const double* C,
                                                     int p, double alpha, uint64_t seed,
                                                     long long draws, int workers, double* center,
                                                     double* shape, double* threshold);
/* Per-effect symmetric intervals: lower, upper, threshold each of length F. */
REFAC_API refac_status refac_analysis_intervals(const refac_analysis* a, double alpha,
                                                uint64_t seed, long long draws, int workers,
                                                double* lower, double* upper, double* threshold);

/* ---- simulation ---- */
/* spec_json: population spec (see README); designs_json: list of named
 * criteria. law_draws = 0 skips confidence sets. */
REFAC_API refac_status refac_simulate(const char* spec_json, const char* designs_json, int reps,
                                      uint64_t seed, int workers, long long law_draws,
                                      double alpha, refac_report** out);
/* Theory-only trade-off curve; criterion_json must have at least two cells. */
REFAC_API refac_status refac_sweep(const char* spec_json, const char* criterion_json,
                                   uint64_t seed, double p_a, const double* p_first,
                                   int n_points, refac_report** out);
/* Imbalance check under complete randomization. */
REFAC_API refac_status refac_imbalance(const char* spec_json, uint64_t seed, long long draws,
                                       double* fraction, double* se);
REFAC_API const char* refac_report_csv(const refac_report* r);
/* include_runtime adds the wall-clock time, which breaks byte identity. */
REFAC_API const char* refac_report_json(refac_report* r, int include_runtime);
REFAC_API void refac_report_free(refac_report* r);

#ifdef __cplusplus
}
#endif

#endif
