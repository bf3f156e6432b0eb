#pragma once

#include <string>
#include <utility>
#include <vector>

#include "refac/linalg.hpp"

namespace refac {

inline constexpr int kMaxFactors = 20;

/// Contrast algebra of a 2^K factorial design.
///
/// Combination q (0-based) sets factor k (0-based) to +1 when bit K-1-k of q
/// is set, so factor 1 is the most significant digit and -1 precedes +1.
/// Effects are ordered by subset size, then lexicographically. Column q of
/// G is the coefficient vector b_q.
struct FactorialStructure {
  int K = 0;
  int Q = 0;
  int F = 0;
  MatrixXd G;
  std::vector<std::vector<int>> effect_subsets;  // 1-based factor numbers
  std::vector<std::string> labels;               // "1", "2", "1:2", ...

  /// 2^{-(K-1)}, the scale of every difference-in-means contrast.
  double contrast_scale() const;
  /// Level (+1 or -1) of 0-based `factor` in 0-based combination `q`.
  int level(int q, int factor) const;
};

FactorialStructure build_structure(int K);

struct GroupSizes {
  std::vector<int> n_q;

  int total() const;
  int Q() const { return static_cast<int>(n_q.size()); }
};

/// Throws ValidationError unless there are Q groups of at least 2 units.
void validate_sizes(const FactorialStructure& s, const GroupSizes& sizes);

/// Splits n as evenly as possible; requires n divisible by Q.
GroupSizes equal_sizes(int Q, int n);

/// Treatment vector: z[i] is the 0-based combination of unit i.
using Assignment = std::vector<int>;

std::vector<int> group_counts(const Assignment& z, int Q);

/// Throws ValidationError naming the first group whose count differs.
void validate_assignment(const Assignment& z, const GroupSizes& sizes);

/// Partition of 0-based indices into ordered, disjoint, nonempty tiers.
struct TierPartition {
  std::vector<std::vector<int>> tiers;

  int count() const { return static_cast<int>(tiers.size()); }
  std::vector<int> sizes() const;
  /// Tiers concatenated in order.
  std::vector<int> flattened() const;
};

struct EffectTierPartition : TierPartition {};
struct CovariateTierPartition : TierPartition {};

void validate_partition(const TierPartition& p, int universe, const char* what);
EffectTierPartition single_effect_tier(int F);
CovariateTierPartition single_covariate_tier(int L);

/// Grid of (covariate tier, effect tier) cells, 0-based. Cell j collects
/// pairs that share one Mahalanobis threshold.
struct TierGrid {
  std::vector<std::vector<std::pair<int, int>>> cells;

  int count() const { return static_cast<int>(cells.size()); }

  /// S_j = {t + h = j} for j < J - 1 and the remainder in the last cell,
  /// with J = min(T, H) (0-based t, h, j).
  static TierGrid triangular(int T, int H);
  /// One cell per effect tier, for a single covariate tier.
  static TierGrid per_effect_tier(int H);
  static TierGrid single_cell(int T, int H);
};

/// Cells must be disjoint, cover the T x H grid, and respect the partial
/// order: t' >= t and h' >= h imply the cell of (t', h') is not earlier.
void validate_grid(const TierGrid& grid, int T, int H);

/// lambda_j = sum over cell j of L_t * F_h.
std::vector<int> grid_dimensions(const TierGrid& grid, const std::vector<int>& covariate_tier_sizes,
                                 const std::vector<int>& effect_tier_sizes);

/// B~ = 2^{-2(K-1)} sum_q n_q^{-1} b_q b_q'.
MatrixXd b_tilde(const FactorialStructure& s, const GroupSizes& sizes);

/// Block Gram-Schmidt of the b_q under the group-size weighted inner
/// product. All matrices are in tier order: rows of `C`, and rows and
/// columns of `C_tilde` and `Psi`, follow `order`.
struct EffectOrthogonalization {
  EffectTierPartition partition;
  std::vector<int> order;    // effect index at each tier-ordered position
  std::vector<int> offsets;  // H + 1 offsets into `order`
  MatrixXd C;                // F x Q, column q is c_q
  MatrixXd C_tilde;          // block diagonal
  MatrixXd Psi;              // unit lower block triangular, b_q[order] = Psi c_q
  std::vector<SpdFactor> blocks;  // factored diagonal blocks of C_tilde

  int tiers() const { return partition.count(); }
  int tier_size(int h) const { return offsets[h + 1] - offsets[h]; }
  /// Rows of C belonging to tier h (F_h x Q).
  MatrixXd tier_rows(int h) const { return C.middleRows(offsets[h], tier_size(h)); }
};

EffectOrthogonalization orthogonalize_effect_coefficients(const FactorialStructure& s,
                                                          const GroupSizes& sizes,
                                                          const EffectTierPartition& p);

/// E = X * Gamma, where Gamma is unit upper block triangular and each
/// covariate tier is residualized on all earlier tiers. Columns keep their
/// original positions.
struct CovariateOrthogonalization {
  CovariateTierPartition partition;
  MatrixXd Gamma;  // L x L
  MatrixXd E;      // n x L
};

CovariateOrthogonalization orthogonalize_covariates(const MatrixXd& X,
                                                    const CovariateTierPartition& p);

/// Picks the listed columns of a matrix.
MatrixXd select_columns(const MatrixXd& m, const std::vector<int>& cols);
MatrixXd select_rows(const MatrixXd& m, const std::vector<int>& rows);

}  // namespace refac
