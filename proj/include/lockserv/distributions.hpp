#pragma once

namespace lockserv::dist {

double normal_pdf(double x);
double normal_cdf(double x);

/// P(l < Z <= u) for a standard normal Z, evaluated on the tail that keeps
/// precision when both bounds sit far out on the same side.
double normal_interval(double lower, double upper);

/// Inverse standard-normal CDF (Wichura AS241, ~1e-16 relative accuracy).
double normal_quantile(double p);

/// Two-sided p-value of a standard-normal test statistic.
double two_sided_p(double z);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Upper-tail probability of a chi-square variable with `df` degrees of freedom.
double chi2_sf(double x, double df);

}  // namespace lockserv::dist
