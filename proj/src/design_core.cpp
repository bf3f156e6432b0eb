#include "refac/design_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "refac/errors.hpp"

namespace refac {

namespace {

void next_subsets(int K, int size, int start, std::vector<int>& current,
                  std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == size) {
    out.push_back(current);
    return;
  }
  for (int k = start; k <= K; ++k) {
    current.push_back(k);
    next_subsets(K, size, k + 1, current, out);
    current.pop_back();
  }
}

std::string subset_label(const std::vector<int>& subset) {
  std::string label;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i) label += ':';
    label += std::to_string(subset[i]);
  }
  return label;
}

}  // namespace

double FactorialStructure::contrast_scale() const { return std::ldexp(1.0, -(K - 1)); }

int FactorialStructure::level(int q, int factor) const {
  return ((q >> (K - 1 - factor)) & 1) ? 1 : -1;
}

FactorialStructure build_structure(int K) {
  if (K < 1 || K > kMaxFactors) {
    throw ValidationError("number of factors K must be in 1.." + std::to_string(kMaxFactors) +
                          ", got " + std::to_string(K));
  }
  FactorialStructure s;
  s.K = K;
  s.Q = 1 << K;
  s.F = s.Q - 1;
  std::vector<int> current;
  for (int size = 1; size <= K; ++size) next_subsets(K, size, 1, current, s.effect_subsets);

  s.G.resize(s.F, s.Q);
  for (int f = 0; f < s.F; ++f) {
    for (int q = 0; q < s.Q; ++q) {
      int sign = 1;
      for (int k : s.effect_subsets[f]) sign *= s.level(q, k - 1);
      s.G(f, q) = sign;
    }
    s.labels.push_back(subset_label(s.effect_subsets[f]));
  }
  return s;
}

int GroupSizes::total() const {
  int n = 0;
  for (int v : n_q) n += v;
  return n;
}

void validate_sizes(const FactorialStructure& s, const GroupSizes& sizes) {
  if (sizes.Q() != s.Q) {
    throw ValidationError("expected " + std::to_string(s.Q) + " group sizes, got " +
                          std::to_string(sizes.Q()));
  }
  for (int q = 0; q < s.Q; ++q) {
    if (sizes.n_q[q] < 2) {
      throw ValidationError("group " + std::to_string(q + 1) + " has size " +
                            std::to_string(sizes.n_q[q]) + "; every group needs at least 2 units");
    }
  }
}

GroupSizes equal_sizes(int Q, int n) {
  if (Q < 1 || n % Q != 0) {
    throw ValidationError("equal group sizes need n divisible by " + std::to_string(Q) +
                          ", got n = " + std::to_string(n));
  }
  return GroupSizes{std::vector<int>(Q, n / Q)};
}

std::vector<int> group_counts(const Assignment& z, int Q) {
  std::vector<int> counts(Q, 0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 0 || z[i] >= Q) {
      throw ValidationError("unit " + std::to_string(i + 1) + " has treatment " +
                            std::to_string(z[i] + 1) + " outside 1.." + std::to_string(Q));
    }
    ++counts[z[i]];
  }
  return counts;
}

void validate_assignment(const Assignment& z, const GroupSizes& sizes) {
  const auto counts = group_counts(z, sizes.Q());
  for (int q = 0; q < sizes.Q(); ++q) {
    if (counts[q] != sizes.n_q[q]) {
      throw ValidationError("group " + std::to_string(q + 1) + " has " + std::to_string(counts[q]) +
                            " units but the design requires " + std::to_string(sizes.n_q[q]));
    }
  }
}

std::vector<int> TierPartition::sizes() const {
  std::vector<int> out;
  for (const auto& t : tiers) out.push_back(static_cast<int>(t.size()));
  return out;
}

std::vector<int> TierPartition::flattened() const {
  std::vector<int> out;
  for (const auto& t : tiers) out.insert(out.end(), t.begin(), t.end());
  return out;
}

void validate_partition(const TierPartition& p, int universe, const char* what) {
  if (p.tiers.empty()) throw ValidationError(std::string(what) + " partition has no tiers");
  std::vector<int> seen(universe, 0);
  for (std::size_t t = 0; t < p.tiers.size(); ++t) {
    if (p.tiers[t].empty()) {
      throw ValidationError(std::string(what) + " tier " + std::to_string(t + 1) + " is empty");
    }
    for (int idx : p.tiers[t]) {
      if (idx < 0 || idx >= universe) {
        throw ValidationError(std::string(what) + " index " + std::to_string(idx + 1) +
                              " is outside 1.." + std::to_string(universe));
      }
      if (seen[idx]++) {
        throw ValidationError(std::string(what) + " index " + std::to_string(idx + 1) +
                              " appears in more than one tier");
      }
    }
  }
  for (int i = 0; i < universe; ++i) {
    if (!seen[i]) {
      throw ValidationError(std::string(what) + " index " + std::to_string(i + 1) +
                            " is not in any tier");
    }
  }
}

EffectTierPartition single_effect_tier(int F) {
  EffectTierPartition p;
  p.tiers.emplace_back();
  for (int f = 0; f < F; ++f) p.tiers[0].push_back(f);
  return p;
}

CovariateTierPartition single_covariate_tier(int L) {
  CovariateTierPartition p;
  p.tiers.emplace_back();
  for (int l = 0; l < L; ++l) p.tiers[0].push_back(l);
  return p;
}

TierGrid TierGrid::triangular(int T, int H) {
  const int J = std::min(T, H);
  TierGrid grid;
  grid.cells.resize(J);
  for (int t = 0; t < T; ++t) {
    for (int h = 0; h < H; ++h) grid.cells[std::min(t + h, J - 1)].emplace_back(t, h);
  }
  return grid;
}

TierGrid TierGrid::per_effect_tier(int H) {
  TierGrid grid;
  for (int h = 0; h < H; ++h) grid.cells.push_back({{0, h}});
  return grid;
}

TierGrid TierGrid::single_cell(int T, int H) {
  TierGrid grid;
  grid.cells.emplace_back();
  for (int t = 0; t < T; ++t) {
    for (int h = 0; h < H; ++h) grid.cells[0].emplace_back(t, h);
  }
  return grid;
}

void validate_grid(const TierGrid& grid, int T, int H) {
  if (grid.cells.empty()) throw ValidationError("tier grid has no cells");
  std::vector<int> cell_of(static_cast<std::size_t>(T) * H, -1);
  for (int j = 0; j < grid.count(); ++j) {
    if (grid.cells[j].empty()) {
      throw ValidationError("tier grid cell " + std::to_string(j + 1) + " is empty");
    }
    for (auto [t, h] : grid.cells[j]) {
      if (t < 0 || t >= T || h < 0 || h >= H) {
        throw ValidationError("tier grid pair (" + std::to_string(t + 1) + "," +
                              std::to_string(h + 1) + ") is outside the " + std::to_string(T) +
                              " x " + std::to_string(H) + " grid");
      }
      int& slot = cell_of[static_cast<std::size_t>(t) * H + h];
      if (slot >= 0) {
        throw ValidationError("tier grid pair (" + std::to_string(t + 1) + "," +
                              std::to_string(h + 1) + ") appears in more than one cell");
      }
      slot = j;
    }
  }
  for (int t = 0; t < T; ++t) {
    for (int h = 0; h < H; ++h) {
      const int j = cell_of[static_cast<std::size_t>(t) * H + h];
      if (j < 0) {
        throw ValidationError("tier grid pair (" + std::to_string(t + 1) + "," +
                              std::to_string(h + 1) + ") is not in any cell");
      }
      // checking the immediate successors is enough for the partial order
      if (t + 1 < T && cell_of[static_cast<std::size_t>(t + 1) * H + h] < j) {
        throw ValidationError("tier grid is not coherent: covariate tier " + std::to_string(t + 2) +
                              " is ranked ahead of tier " + std::to_string(t + 1) +
                              " for effect tier " + std::to_string(h + 1));
      }
      if (h + 1 < H && cell_of[static_cast<std::size_t>(t) * H + h + 1] < j) {
        throw ValidationError("tier grid is not coherent: effect tier " + std::to_string(h + 2) +
                              " is ranked ahead of tier " + std::to_string(h + 1) +
                              " for covariate tier " + std::to_string(t + 1));
      }
    }
  }
}

std::vector<int> grid_dimensions(const TierGrid& grid, const std::vector<int>& covariate_tier_sizes,
                                 const std::vector<int>& effect_tier_sizes) {
  std::vector<int> dims;
  for (const auto& cell : grid.cells) {
    int lambda = 0;
    for (auto [t, h] : cell) lambda += covariate_tier_sizes.at(t) * effect_tier_sizes.at(h);
    dims.push_back(lambda);
  }
  return dims;
}

MatrixXd b_tilde(const FactorialStructure& s, const GroupSizes& sizes) {
  validate_sizes(s, sizes);
  const double scale = std::ldexp(1.0, -2 * (s.K - 1));
  VectorXd w(s.Q);
  for (int q = 0; q < s.Q; ++q) w(q) = scale / sizes.n_q[q];
  return s.G * w.asDiagonal() * s.G.transpose();
}

EffectOrthogonalization orthogonalize_effect_coefficients(const FactorialStructure& s,
                                                          const GroupSizes& sizes,
                                                          const EffectTierPartition& p) {
  validate_sizes(s, sizes);
  validate_partition(p, s.F, "effect");

  EffectOrthogonalization out;
  out.partition = p;
  out.order = p.flattened();
  out.offsets.push_back(0);
  for (int size : p.sizes()) out.offsets.push_back(out.offsets.back() + size);

  const MatrixXd B = select_rows(s.G, out.order);
  const double scale = std::ldexp(1.0, -2 * (s.K - 1));
  VectorXd w(s.Q);
  for (int q = 0; q < s.Q; ++q) w(q) = scale / sizes.n_q[q];
  const MatrixXd Bt = B * w.asDiagonal() * B.transpose();

  const int F = s.F;
  out.C = B;
  out.Psi = MatrixXd::Identity(F, F);
  for (int h = 1; h < p.count(); ++h) {
    const int lead = out.offsets[h];
    const int size = out.tier_size(h);
    const SpdFactor leading =
        factor_spd(Bt.topLeftCorner(lead, lead),
                   "leading block of B~ for effect tiers 1.." + std::to_string(h));
    // A_h = B~[F_h, <h] B~[<h, <h]^{-1}
    const MatrixXd A = Bt.block(lead, 0, size, lead) * leading.inverse;
    out.C.middleRows(lead, size) = B.middleRows(lead, size) - A * B.topRows(lead);
    out.Psi.block(lead, 0, size, lead) = A * out.Psi.topLeftCorner(lead, lead);
  }
  out.C_tilde = out.C * w.asDiagonal() * out.C.transpose();
  for (int h = 0; h < p.count(); ++h) {
    const int off = out.offsets[h];
    const int size = out.tier_size(h);
    out.blocks.push_back(factor_spd(out.C_tilde.block(off, off, size, size),
                                    "orthogonalized effect block " + std::to_string(h + 1)));
  }
  return out;
}

CovariateOrthogonalization orthogonalize_covariates(const MatrixXd& X,
                                                    const CovariateTierPartition& p) {
  const int L = static_cast<int>(X.cols());
  validate_partition(p, L, "covariate");
  CovariateOrthogonalization out;
  out.partition = p;
  out.Gamma = MatrixXd::Identity(L, L);
  const MatrixXd S = finite_population_covariance(X);
  std::vector<int> previous;
  for (int t = 0; t < p.count(); ++t) {
    const auto& block = p.tiers[t];
    if (t > 0) {
      const SpdFactor prior =
          factor_spd(select_columns(select_rows(S, previous), previous),
                     "degenerate covariates: covariance of covariate tiers 1.." + std::to_string(t));
      const MatrixXd cross = select_columns(select_rows(S, previous), block);
      const MatrixXd coef = prior.inverse * cross;
      for (std::size_t i = 0; i < previous.size(); ++i) {
        for (std::size_t j = 0; j < block.size(); ++j) out.Gamma(previous[i], block[j]) = -coef(i, j);
      }
    }
    previous.insert(previous.end(), block.begin(), block.end());
  }
  out.E = X * out.Gamma;
  return out;
}

MatrixXd select_columns(const MatrixXd& m, const std::vector<int>& cols) {
  MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = m.col(cols[j]);
  return out;
}

MatrixXd select_rows(const MatrixXd& m, const std::vector<int>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

}  // namespace refac
