#include "refac/chisq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "refac/errors.hpp"

namespace refac::chisq {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 10000;

// log of the common prefactor x^s e^{-x} / Gamma(s)
double log_prefactor(double s, double x) { return s * std::log(x) - x - std::lgamma(s); }

double lower_series(double s, double x) {
  double term = 1.0 / s;
  double sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (s + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(log_prefactor(s, x));
}

double upper_continued_fraction(double s, double x) {
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_prefactor(s, x)) * h;
}

void check_dof(double dof) {
  if (!(dof > 0.0) || !std::isfinite(dof)) {
    throw ValidationError("chi-square degrees of freedom must be positive, got " +
                          std::to_string(dof));
  }
}

}  // namespace

double regularized_gamma_p(double s, double x) {
  if (!(s > 0.0)) throw ValidationError("incomplete gamma shape must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < s + 1.0) return lower_series(s, x);
  return 1.0 - upper_continued_fraction(s, x);
}

double regularized_gamma_q(double s, double x) {
  if (!(s > 0.0)) throw ValidationError("incomplete gamma shape must be positive");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < s + 1.0) return 1.0 - lower_series(s, x);
  return upper_continued_fraction(s, x);
}

double cdf(double dof, double x) {
  check_dof(dof);
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double pdf(double dof, double x) {
  check_dof(dof);
  if (x < 0.0) return 0.0;
  const double s = 0.5 * dof;
  if (x == 0.0) {
    if (s < 1.0) return std::numeric_limits<double>::infinity();
    return s == 1.0 ? 0.5 : 0.0;
  }
  const double half = 0.5 * x;
  return 0.5 * std::exp((s - 1.0) * std::log(half) - half - std::lgamma(s));
}

namespace {

// Safeguarded Newton on [0, upper] for cdf(x) = target.
double invert_cdf(double dof, double target, double upper) {
  double lo = 0.0;
  double hi = upper;
  // Small-x expansion P(s, y) ~ y^s / Gamma(s + 1) gives the starting point.
  const double s = 0.5 * dof;
  double x = 2.0 * std::exp((std::log(target) + std::lgamma(s + 1.0)) / s);
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = cdf(dof, x) - target;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 1e-15 * hi) break;
    const double density = pdf(dof, x);
    double next = density > 0.0 ? x - f / density : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1e-300, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return std::clamp(x, 0.0, upper);
}

}  // namespace

double quantile(double dof, double p) {
  check_dof(dof);
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("acceptance probability must lie in (0, 1), got " + std::to_string(p));
  }
  double hi = std::max(1.0, dof);
  while (cdf(dof, hi) < p) hi *= 2.0;
  return invert_cdf(dof, p, hi);
}

double truncated_quantile(double dof, double u, double upper, double cdf_upper) {
  return invert_cdf(dof, u * cdf_upper, upper);
}

double v_constant(int m, double a) {
  if (m < 1) throw ValidationError("dimension must be at least 1");
  if (!(a > 0.0)) throw ValidationError("threshold must be positive");
  if (std::isinf(a)) return 1.0;
  const double denominator = cdf(m, a);
  if (denominator <= 0.0) {
    // both CDFs underflow; use the a -> 0 limit of the ratio
    return a / (m + 2.0);
  }
  return cdf(m + 2, a) / denominator;
}

std::vector<double> thresholds_from_probability(std::span<const int> dims,
                                                std::span<const double> p) {
  if (dims.size() != p.size()) {
    throw ValidationError("thresholds: " + std::to_string(dims.size()) + " dims but " +
                          std::to_string(p.size()) + " probabilities");
  }
  std::vector<double> out;
  out.reserve(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1) throw ValidationError("tier dimension must be at least 1");
    out.push_back(quantile(dims[i], p[i]));
  }
  return out;
}

}  // namespace refac::chisq
