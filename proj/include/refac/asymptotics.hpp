#pragma once

#include <optional>
#include <vector>

#include "refac/linalg.hpp"
#include "refac/rng.hpp"

namespace refac {

/// coef * zeta, with zeta a standard `dim`-dimensional Gaussian conditioned
/// on squared norm <= threshold, or untruncated when threshold is empty.
struct LawComponent {
  MatrixXd coef;  // F x dim
  int dim = 0;
  std::optional<double> threshold;
};

/// base_cov^{1/2} eps + sum_i coef_i zeta_i, all terms independent.
struct AsymptoticLaw {
  MatrixXd base_cov;
  std::vector<LawComponent> components;

  int F() const { return static_cast<int>(base_cov.rows()); }
  /// base_cov + sum_i v_{d_i, a_i} coef_i coef_i'.
  MatrixXd covariance() const;
  /// Throws on shape mismatches, nonpositive thresholds or base_cov not PSD.
  void validate() const;
};

/// Fills `out` (length m) with one draw of zeta_{m,a}. `cdf_a` must be
/// P(chi2_m <= a). Radius by inverse CDF of chi2_m on [0, a]; direction is
/// D / |D| for D standard normal, which equals independent signs times the
/// square root of a Dirichlet(1/2, ..., 1/2) vector.
void truncated_gaussian_draw(int m, double a, double cdf_a, Rng& rng, double* out);

/// count x m matrix of independent zeta_{m,a} draws.
MatrixXd sample_truncated_gaussian(int m, double a, Rng& rng, Eigen::Index count);

/// Rows per block in simulate_law; block b always uses rng.substream(b).
inline constexpr Eigen::Index kLawBlockRows = 4096;

/// draws x F matrix of law samples. Output is identical for every worker
/// count.
MatrixXd simulate_law(const AsymptoticLaw& law, const Rng& rng, Eigen::Index draws,
                      int workers = 1);

/// Quadratic forms (C phi)' shape^{-1} (C phi) over `draws` law samples,
/// computed block by block without storing the samples.
VectorXd law_quadratic_forms(const AsymptoticLaw& law, const MatrixXd& C, const MatrixXd& shape,
                             const Rng& rng, Eigen::Index draws, int workers = 1);

/// Empirical (1 - alpha) quantile: the ceil((1 - alpha) N)-th order
/// statistic of `values`, which is sorted in place.
double empirical_quantile(VectorXd& values, double alpha);

inline constexpr Eigen::Index kMinQuantileDraws = 10'000;
inline constexpr Eigen::Index kDefaultQuantileDraws = 100'000;

/// c_{1-alpha} for every alpha, all from one batch of law draws.
std::vector<double> quantile_thresholds(const AsymptoticLaw& law, const MatrixXd& C,
                                        const MatrixXd& shape, const std::vector<double>& alphas,
                                        const Rng& rng, Eigen::Index draws, int workers = 1);

double quantile_threshold(const AsymptoticLaw& law, const MatrixXd& C, const MatrixXd& shape,
                          double alpha, const Rng& rng, Eigen::Index draws, int workers = 1);

struct CorrelationProfile {
  VectorXd R2;          // F
  MatrixXd per_tier;    // F x J, rows sum to R2
  MatrixXd canonical;   // J x F, descending within each row
};

/// From V = Cov(tau_hat) and the explained covariance of each tier.
CorrelationProfile correlation_profile(const MatrixXd& V, const std::vector<MatrixXd>& explained);

/// sum_j (1 - v_{d_j, a_j}) per_tier(f, j); empty thresholds mean no
/// truncation.
VectorXd priasv(const CorrelationProfile& profile, const std::vector<int>& dims,
                const std::vector<std::optional<double>>& thresholds);

/// Whether V^{-1/2} U_j V^{-1/2} pairwise commute to `tol` (relative), the
/// condition under which the quantile threshold is monotone in the
/// canonical correlations.
bool simultaneously_diagonalizable(const MatrixXd& V, const std::vector<MatrixXd>& explained,
                                   double tol = 1e-8);

}  // namespace refac
