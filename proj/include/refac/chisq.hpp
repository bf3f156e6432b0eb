#pragma once

#include <span>
#include <vector>

namespace refac::chisq {

/// Regularized lower incomplete gamma P(s, x). Series for x < s + 1,
/// Lentz continued fraction for the upper tail otherwise.
double regularized_gamma_p(double s, double x);

/// Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x).
double regularized_gamma_q(double s, double x);

double cdf(double dof, double x);
double pdf(double dof, double x);

/// Inverse CDF by bracketed bisection to 1e-10 absolute. Requires p in (0, 1).
double quantile(double dof, double p);

/// Inverse CDF of chi-square(dof) restricted to [0, upper], evaluated at
/// u in (0, 1). `cdf_upper` must equal cdf(dof, upper). Safeguarded Newton
/// iterations inside the bracket; used by the truncated-Gaussian sampler.
double truncated_quantile(double dof, double u, double upper, double cdf_upper);

/// v_{m,a} = P(chi2_{m+2} <= a) / P(chi2_m <= a).
double v_constant(int m, double a);

/// Per-tier thresholds a_h = quantile(chi2_{dims[h]}, p[h]).
std::vector<double> thresholds_from_probability(std::span<const int> dims,
                                                std::span<const double> p);

}  // namespace refac::chisq
