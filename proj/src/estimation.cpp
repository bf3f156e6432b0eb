#include "refac/estimation.hpp"

#include <cmath>
#include <string>

#include "refac/errors.hpp"

namespace refac {

namespace {

double weight_scale(const FactorialStructure& s) { return std::ldexp(1.0, -2 * (s.K - 1)); }

MatrixXd weighted_outer(const SampleMoments& m, const FactorialStructure& s, bool residual) {
  if (static_cast<int>(m.groups.size()) != s.Q) {
    throw ValidationError("moments have " + std::to_string(m.groups.size()) + " groups, design has " +
                          std::to_string(s.Q));
  }
  MatrixXd out = MatrixXd::Zero(s.F, s.F);
  for (int q = 0; q < s.Q; ++q) {
    const auto& g = m.groups[q];
    const double v = residual ? g.s_perp : g.s_yy;
    out.noalias() += (v / g.n) * s.G.col(q) * s.G.col(q).transpose();
  }
  return weight_scale(s) * out;
}

}  // namespace

VectorXd effect_estimates(const VectorXd& y, const Assignment& z, const FactorialStructure& s) {
  if (static_cast<Eigen::Index>(z.size()) != y.size()) {
    throw ValidationError("outcome and assignment lengths differ");
  }
  const MatrixXd ybar = group_means(MatrixXd(y), z, s.Q);
  return s.contrast_scale() * s.G * ybar.col(0);
}

SampleMoments sample_moments(const VectorXd& y, const MatrixXd& X, const Assignment& z, int Q) {
  const Eigen::Index n = y.size();
  if (X.rows() != n || static_cast<Eigen::Index>(z.size()) != n) {
    throw ValidationError("outcome, covariate and assignment lengths differ");
  }
  if (!y.allFinite()) throw ValidationError("outcomes contain non-finite values");
  const int L = static_cast<int>(X.cols());
  std::vector<std::vector<Eigen::Index>> members(Q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int q = z[i];
    if (q < 0 || q >= Q) throw ValidationError("treatment index out of range");
    members[q].push_back(i);
  }
  SampleMoments m;
  m.L = L;
  for (int q = 0; q < Q; ++q) {
    const auto& idx = members[q];
    const int nq = static_cast<int>(idx.size());
    if (nq < L + 2 || nq < 2) {
      throw ValidationError("group " + std::to_string(q + 1) + " has " + std::to_string(nq) +
                            " units; variance estimation needs at least L + 2 = " +
                            std::to_string(std::max(L + 2, 2)));
    }
    VectorXd yq(nq);
    MatrixXd xq(nq, L);
    for (int i = 0; i < nq; ++i) {
      yq(i) = y(idx[i]);
      xq.row(i) = X.row(idx[i]);
    }
    GroupMoments g;
    g.n = nq;
    g.mean_y = yq.mean();
    g.mean_x = xq.colwise().mean();
    const VectorXd yc = yq.array() - g.mean_y;
    const MatrixXd xc = xq.rowwise() - g.mean_x;
    g.s_yy = yc.squaredNorm() / (nq - 1);
    g.s_yx = (yc.transpose() * xc) / (nq - 1);
    g.s_xx = (xc.transpose() * xc) / (nq - 1);
    g.s_perp = g.s_yy;
    if (L > 0) {
      const SpdFactor f =
          factor_spd(g.s_xx, "within-group covariate covariance of group " + std::to_string(q + 1));
      double perp = g.s_yy - (g.s_yx * f.inverse * g.s_yx.transpose())(0, 0);
      if (perp < 0.0) {
        if (perp < -kPsdClamp * std::max(1.0, g.s_yy)) {
          throw NumericalError("negative residual variance in group " + std::to_string(q + 1));
        }
        perp = 0.0;
      }
      g.s_perp = perp;
    }
    m.groups.push_back(std::move(g));
  }
  return m;
}

MatrixXd neyman_covariance(const SampleMoments& m, const FactorialStructure& s) {
  return weighted_outer(m, s, false);
}

MatrixXd vhat_tautau_perp(const SampleMoments& m, const FactorialStructure& s) {
  return weighted_outer(m, s, true);
}

std::vector<std::vector<MatrixXd>> cross_covariance_estimates(const SampleMoments& m,
                                                              const BalanceEvaluator& design) {
  const auto& s = design.structure();
  const auto& layout = design.layout();
  const auto& orth = design.effects();
  const auto& gamma = design.covariate_orthogonalization().Gamma;
  if (m.L != design.L()) throw ValidationError("moments and design disagree on L");
  if (static_cast<int>(m.groups.size()) != s.Q) throw ValidationError("moments have wrong group count");
  const int T = layout.covariates.count();
  const int H = orth.tiers();
  std::vector<std::vector<MatrixXd>> out(T, std::vector<MatrixXd>(H));
  for (int t = 0; t < T; ++t) {
    const auto& cols = layout.covariates.tiers[t];
    const MatrixXd gt = select_columns(gamma, cols);
    const MatrixXd& pop_sqrt = design.tier_covariances()[t].sqrt;
    std::vector<RowVectorXd> r(s.Q);
    for (int q = 0; q < s.Q; ++q) {
      const auto& g = m.groups[q];
      const RowVectorXd s_qe = g.s_yx * gt;
      const MatrixXd s_ee = gt.transpose() * g.s_xx * gt;
      const SpdFactor f = factor_spd(s_ee, "within-group covariance of orthogonalized covariate tier " +
                                               std::to_string(t + 1) + " in group " +
                                               std::to_string(q + 1));
      r[q] = s_qe * f.inv_sqrt * pop_sqrt;
    }
    for (int h = 0; h < H; ++h) {
      const MatrixXd ch = orth.tier_rows(h);
      MatrixXd w = MatrixXd::Zero(s.F, ch.rows() * static_cast<Eigen::Index>(cols.size()));
      for (int q = 0; q < s.Q; ++q) {
        const MatrixXd bc = s.G.col(q) * ch.col(q).transpose();
        w += kron(bc, r[q]) / m.groups[q].n;
      }
      out[t][h] = weight_scale(s) * w;
    }
  }
  return out;
}

std::vector<MatrixXd> projection_coefficient_estimates(const SampleMoments& m,
                                                       const BalanceEvaluator& design) {
  const auto cross = cross_covariance_estimates(m, design);
  const auto& layout = design.layout();
  const auto& orth = design.effects();
  std::vector<MatrixXd> out;
  for (const auto& cell : layout.grid.cells) {
    std::vector<MatrixXd> parts;
    Eigen::Index width = 0;
    for (auto [t, h] : cell) {
      const MatrixXd inv_sqrt = kron(orth.blocks[h].inv_sqrt, design.tier_covariances()[t].inv_sqrt);
      parts.push_back(cross[t][h] * inv_sqrt);
      width += parts.back().cols();
    }
    MatrixXd coef(design.structure().F, width);
    Eigen::Index col = 0;
    for (const auto& part : parts) {
      coef.middleCols(col, part.cols()) = part;
      col += part.cols();
    }
    out.push_back(std::move(coef));
  }
  return out;
}

PopulationTruth population_truth(const MatrixXd& Y, const BalanceEvaluator& design) {
  const auto& s = design.structure();
  const auto& sizes = design.sizes();
  const MatrixXd& X = design.covariates();
  const int n = sizes.total();
  if (Y.rows() != n || Y.cols() != s.Q) {
    throw ValidationError("potential outcomes must be n x Q = " + std::to_string(n) + " x " +
                          std::to_string(s.Q));
  }
  const double scale = weight_scale(s);
  PopulationTruth truth;
  const MatrixXd individual = s.contrast_scale() * Y * s.G.transpose();  // n x F
  truth.tau = individual.colwise().mean().transpose();
  truth.S_tautau = finite_population_covariance(individual);

  const MatrixXd S_yy = finite_population_covariance(Y);
  truth.V = -truth.S_tautau / n;
  for (int q = 0; q < s.Q; ++q) {
    truth.V += (scale * S_yy(q, q) / sizes.n_q[q]) * s.G.col(q) * s.G.col(q).transpose();
  }
  truth.V = symmetrize(truth.V);

  const int L = design.L();
  const int F = s.F;
  truth.V_par = MatrixXd::Zero(F, F);
  if (L == 0) {
    truth.V_perp = truth.V;
    truth.R2 = VectorXd::Zero(F);
    return truth;
  }
  const MatrixXd S_yx = finite_population_cross_covariance(Y, X);  // Q x L
  truth.V_tx = MatrixXd::Zero(F, static_cast<Eigen::Index>(F) * L);
  for (int q = 0; q < s.Q; ++q) {
    const MatrixXd bb = s.G.col(q) * s.G.col(q).transpose();
    truth.V_tx += kron(bb, S_yx.row(q)) * (scale / sizes.n_q[q]);
  }
  const KroneckerSpd vx = vxx(s, sizes, finite_population_covariance(X));
  truth.V_xx = vx.dense();
  truth.V_par = symmetrize(truth.V_tx * vx.inverse_dense() * truth.V_tx.transpose());
  truth.V_perp = truth.V - truth.V_par;
  truth.R2 = truth.V_par.diagonal().cwiseQuotient(truth.V.diagonal());

  const auto& layout = design.layout();
  const auto& orth = design.effects();
  const auto& gamma = design.covariate_orthogonalization().Gamma;
  for (const auto& cell : layout.grid.cells) {
    std::vector<MatrixXd> parts;
    Eigen::Index width = 0;
    for (auto [t, h] : cell) {
      const auto& cols = layout.covariates.tiers[t];
      const MatrixXd S_qe = S_yx * select_columns(gamma, cols);  // Q x L_t
      const MatrixXd ch = orth.tier_rows(h);
      MatrixXd w = MatrixXd::Zero(F, ch.rows() * static_cast<Eigen::Index>(cols.size()));
      for (int q = 0; q < s.Q; ++q) {
        w += kron(s.G.col(q) * ch.col(q).transpose(), S_qe.row(q)) * (scale / sizes.n_q[q]);
      }
      parts.push_back(w * kron(orth.blocks[h].inv_sqrt, design.tier_covariances()[t].inv_sqrt));
      width += parts.back().cols();
    }
    MatrixXd coef(F, width);
    Eigen::Index col = 0;
    for (const auto& part : parts) {
      coef.middleCols(col, part.cols()) = part;
      col += part.cols();
    }
    truth.explained.push_back(symmetrize(coef * coef.transpose()));
    truth.coefficients.push_back(std::move(coef));
  }
  return truth;
}

}  // namespace refac
