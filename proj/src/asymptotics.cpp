#include "refac/asymptotics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "refac/chisq.hpp"
#include "refac/errors.hpp"

namespace refac {

MatrixXd AsymptoticLaw::covariance() const {
  MatrixXd cov = base_cov;
  for (const auto& c : components) {
    const double v = c.threshold ? chisq::v_constant(c.dim, *c.threshold) : 1.0;
    cov += v * c.coef * c.coef.transpose();
  }
  return symmetrize(cov);
}

void AsymptoticLaw::validate() const {
  if (base_cov.rows() != base_cov.cols() || base_cov.rows() == 0) {
    throw ValidationError("law base covariance must be a nonempty square matrix");
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    if (c.dim < 1 || c.coef.rows() != base_cov.rows() || c.coef.cols() != c.dim) {
      throw ValidationError("law component " + std::to_string(i + 1) + " has inconsistent shape");
    }
    if (c.threshold && !(*c.threshold > 0.0)) {
      throw ValidationError("law component " + std::to_string(i + 1) +
                            " needs a positive threshold");
    }
  }
  psd_sqrt(base_cov, "law base covariance");
}

void truncated_gaussian_draw(int m, double a, double cdf_a, Rng& rng, double* out) {
  double norm2 = 0.0;
  for (int i = 0; i < m; ++i) {
    out[i] = rng.normal();
    norm2 += out[i] * out[i];
  }
  const double r2 = chisq::truncated_quantile(m, rng.uniform(), a, cdf_a);
  const double scale = std::sqrt(r2 / norm2);
  for (int i = 0; i < m; ++i) out[i] *= scale;
}

MatrixXd sample_truncated_gaussian(int m, double a, Rng& rng, Eigen::Index count) {
  if (m < 1) throw ValidationError("dimension must be at least 1");
  if (!(a > 0.0)) throw ValidationError("threshold must be positive");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(count, m);
  const double cdf_a = chisq::cdf(m, a);
  for (Eigen::Index i = 0; i < count; ++i) truncated_gaussian_draw(m, a, cdf_a, rng, out.row(i).data());
  return out;
}

namespace {

struct PreparedLaw {
  MatrixXd base_sqrt;
  std::vector<double> cdf;
};

PreparedLaw prepare(const AsymptoticLaw& law) {
  law.validate();
  PreparedLaw p;
  p.base_sqrt = psd_sqrt(law.base_cov, "law base covariance");
  for (const auto& c : law.components) {
    p.cdf.push_back(c.threshold ? chisq::cdf(c.dim, *c.threshold) : 1.0);
  }
  return p;
}

// Per row: F normals for the residual, then each component in order.
MatrixXd simulate_block(const AsymptoticLaw& law, const PreparedLaw& p, Rng& rng, Eigen::Index rows) {
  const int F = law.F();
  MatrixXd eps(rows, F);
  std::vector<MatrixXd> zeta;
  for (const auto& c : law.components) zeta.emplace_back(rows, c.dim);
  std::vector<double> buf;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int f = 0; f < F; ++f) eps(r, f) = rng.normal();
    for (std::size_t i = 0; i < law.components.size(); ++i) {
      const auto& c = law.components[i];
      buf.resize(c.dim);
      if (c.threshold) {
        truncated_gaussian_draw(c.dim, *c.threshold, p.cdf[i], rng, buf.data());
      } else {
        for (int d = 0; d < c.dim; ++d) buf[d] = rng.normal();
      }
      for (int d = 0; d < c.dim; ++d) zeta[i](r, d) = buf[d];
    }
  }
  MatrixXd out = eps * p.base_sqrt;
  for (std::size_t i = 0; i < law.components.size(); ++i) {
    out.noalias() += zeta[i] * law.components[i].coef.transpose();
  }
  return out;
}

template <class Fn>
void for_each_block(Eigen::Index draws, int workers, Fn&& fn) {
  const Eigen::Index blocks = (draws + kLawBlockRows - 1) / kLawBlockRows;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<Eigen::Index>(blocks, 1))));
  std::atomic<Eigen::Index> next{0};
  auto run = [&] {
    for (Eigen::Index b = next++; b < blocks; b = next++) {
      const Eigen::Index start = b * kLawBlockRows;
      fn(b, start, std::min(kLawBlockRows, draws - start));
    }
  };
  if (workers == 1) {
    run();
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
}

}  // namespace

MatrixXd simulate_law(const AsymptoticLaw& law, const Rng& rng, Eigen::Index draws, int workers) {
  if (draws < 1) throw ValidationError("law simulation needs at least one draw");
  const PreparedLaw p = prepare(law);
  MatrixXd out(draws, law.F());
  for_each_block(draws, workers, [&](Eigen::Index b, Eigen::Index start, Eigen::Index rows) {
    Rng block_rng = rng.substream(static_cast<std::uint64_t>(b));
    out.middleRows(start, rows) = simulate_block(law, p, block_rng, rows);
  });
  return out;
}

VectorXd law_quadratic_forms(const AsymptoticLaw& law, const MatrixXd& C, const MatrixXd& shape,
                             const Rng& rng, Eigen::Index draws, int workers) {
  if (draws < 1) throw ValidationError("law simulation needs at least one draw");
  if (C.cols() != law.F()) {
    throw ValidationError("contrast matrix has " + std::to_string(C.cols()) + " columns, expected " +
                          std::to_string(law.F()));
  }
  if (shape.rows() != C.rows() || shape.cols() != C.rows()) {
    throw ValidationError("shape matrix must be p x p with p the number of contrast rows");
  }
  const PreparedLaw p = prepare(law);
  const SpdFactor sf = factor_spd(shape, "confidence set shape matrix");
  // rows of phi -> rows of (shape^{-1/2} C phi)'
  const MatrixXd map = C.transpose() * sf.inv_sqrt;
  VectorXd out(draws);
  for_each_block(draws, workers, [&](Eigen::Index b, Eigen::Index start, Eigen::Index rows) {
    Rng block_rng = rng.substream(static_cast<std::uint64_t>(b));
    const MatrixXd phi = simulate_block(law, p, block_rng, rows);
    out.segment(start, rows) = (phi * map).rowwise().squaredNorm();
  });
  return out;
}

double empirical_quantile(VectorXd& values, double alpha) {
  if (values.size() == 0) throw ValidationError("quantile of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  std::sort(values.data(), values.data() + values.size());
  const auto n = static_cast<double>(values.size());
  auto k = static_cast<Eigen::Index>(std::ceil((1.0 - alpha) * n - 1e-9));
  k = std::clamp<Eigen::Index>(k, 1, values.size());
  return values(k - 1);
}

std::vector<double> quantile_thresholds(const AsymptoticLaw& law, const MatrixXd& C,
                                        const MatrixXd& shape, const std::vector<double>& alphas,
                                        const Rng& rng, Eigen::Index draws, int workers) {
  if (draws < kMinQuantileDraws) {
    throw ValidationError("quantile thresholds need at least " + std::to_string(kMinQuantileDraws) +
                          " draws, got " + std::to_string(draws));
  }
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  }
  std::vector<double> out;
  if (law.components.empty()) {
    // Gaussian law measured in its own metric: the forms are exactly chi-square.
    const MatrixXd own = C * law.base_cov * C.transpose();
    if ((own - shape).norm() <= 1e-12 * std::max(1.0, own.norm())) {
      for (double a : alphas) out.push_back(chisq::quantile(static_cast<double>(C.rows()), 1.0 - a));
      return out;
    }
  }
  VectorXd forms = law_quadratic_forms(law, C, shape, rng, draws, workers);
  for (double a : alphas) out.push_back(empirical_quantile(forms, a));
  return out;
}

double quantile_threshold(const AsymptoticLaw& law, const MatrixXd& C, const MatrixXd& shape,
                          double alpha, const Rng& rng, Eigen::Index draws, int workers) {
  return quantile_thresholds(law, C, shape, {alpha}, rng, draws, workers).front();
}

CorrelationProfile correlation_profile(const MatrixXd& V, const std::vector<MatrixXd>& explained) {
  const SpdFactor vf = factor_spd(V, "sampling covariance V_tautau");
  const Eigen::Index F = V.rows();
  const auto J = static_cast<Eigen::Index>(explained.size());
  CorrelationProfile p;
  p.per_tier.resize(F, J);
  p.canonical.resize(J, F);
  for (Eigen::Index j = 0; j < J; ++j) {
    const MatrixXd& U = explained[j];
    if (U.rows() != F || U.cols() != F) throw ValidationError("explained covariance has wrong shape");
    for (Eigen::Index f = 0; f < F; ++f) p.per_tier(f, j) = std::max(0.0, U(f, f) / V(f, f));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(vf.inv_sqrt * U * vf.inv_sqrt),
                                                Eigen::EigenvaluesOnly);
    VectorXd ev = eig.eigenvalues().reverse().cwiseMax(0.0);
    p.canonical.row(j) = ev.transpose();
  }
  p.R2 = J > 0 ? VectorXd(p.per_tier.rowwise().sum()) : VectorXd::Zero(F);
  return p;
}

VectorXd priasv(const CorrelationProfile& profile, const std::vector<int>& dims,
                const std::vector<std::optional<double>>& thresholds) {
  const auto J = profile.per_tier.cols();
  if (static_cast<Eigen::Index>(dims.size()) != J ||
      static_cast<Eigen::Index>(thresholds.size()) != J) {
    throw ValidationError("priasv: profile has " + std::to_string(J) + " tiers but " +
                          std::to_string(dims.size()) + " dims and " +
                          std::to_string(thresholds.size()) + " thresholds were given");
  }
  VectorXd out = VectorXd::Zero(profile.per_tier.rows());
  for (Eigen::Index j = 0; j < J; ++j) {
    if (!thresholds[j]) continue;
    const double v = chisq::v_constant(dims[j], *thresholds[j]);
    out += (1.0 - v) * profile.per_tier.col(j);
  }
  return out;
}

bool simultaneously_diagonalizable(const MatrixXd& V, const std::vector<MatrixXd>& explained,
                                   double tol) {
  const SpdFactor vf = factor_spd(V, "sampling covariance V_tautau");
  std::vector<MatrixXd> normalized;
  for (const auto& U : explained) normalized.push_back(vf.inv_sqrt * U * vf.inv_sqrt);
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    for (std::size_t j = i + 1; j < normalized.size(); ++j) {
      const MatrixXd comm = normalized[i] * normalized[j] - normalized[j] * normalized[i];
      const double scale = std::max(1.0, normalized[i].norm() * normalized[j].norm());
      if (comm.norm() > tol * scale) return false;
    }
  }
  return true;
}

}  // namespace refac
