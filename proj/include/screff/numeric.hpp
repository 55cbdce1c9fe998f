#pragma once

#include <functional>
#include <span>
#include <vector>

namespace screff {

/// Regularized lower incomplete gamma P(a, x); series for x < a + 1,
/// continued fraction otherwise.
double reg_lower_gamma(double a, double x);

/// Power-series evaluation of P(a, x); converges everywhere but slowly for
/// large x. Exposed so the two routes can be cross-checked.
double reg_lower_gamma_series(double a, double x);

/// Continued-fraction evaluation of P(a, x); accurate for x >= a + 1.
double reg_lower_gamma_contfrac(double a, double x);

/// CDF of Gamma(shape, rate) at x.
double gamma_cdf(double shape, double rate, double x);

/// Log density of Gamma(shape, rate) at x > 0.
double gamma_logpdf(double shape, double rate, double x);

/// Quantile of Gamma(shape, rate): smallest x with CDF(x) >= p.
double gamma_quantile(double shape, double rate, double p);

/// Log density of Normal(mean, sd) at x.
double normal_logpdf(double x, double mean, double sd);

/// Type-7 (linear interpolation) quantile of an ascending-sorted sample.
double quantile_sorted(std::span<const double> sorted, double p);

/// Convenience: copies, sorts, and applies quantile_sorted.
double quantile(std::span<const double> values, double p);

/// One-sample Kolmogorov-Smirnov statistic of an ascending-sorted sample
/// against a continuous CDF, evaluating both one-sided deviations at the
/// empirical jump points.
double ks_statistic(std::span<const double> sorted,
                    const std::function<double(double)>& cdf);

/// Gaussian kernel density estimate with Silverman bandwidth, evaluated at
/// the given grid points.
std::vector<double> gaussian_kde(std::span<const double> sample,
                                 std::span<const double> grid);

}  // namespace screff
