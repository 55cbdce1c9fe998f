#include "screff/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace screff {

namespace {
constexpr int kMaxIter = 2000;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
}  // namespace

double reg_lower_gamma_series(double a, double x) {
  if (x <= 0.0) return 0.0;
  // P(a,x) = x^a e^-x / Gamma(a) * sum_{n>=0} x^n / (a(a+1)...(a+n))
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double reg_lower_gamma_contfrac(double a, double x) {
  // Lentz's algorithm for the continued fraction of Q(a, x).
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  return 1.0 - q;
}

double reg_lower_gamma(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("reg_lower_gamma: shape must be > 0");
  if (x < 0.0) throw std::domain_error("reg_lower_gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  return (x < a + 1.0) ? reg_lower_gamma_series(a, x)
                       : reg_lower_gamma_contfrac(a, x);
}

double gamma_cdf(double shape, double rate, double x) {
  if (!(rate > 0.0)) throw std::domain_error("gamma_cdf: rate must be > 0");
  if (x <= 0.0) return 0.0;
  return reg_lower_gamma(shape, rate * x);
}

double gamma_logpdf(double shape, double rate, double x) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::domain_error("gamma_logpdf: shape and rate must be > 0");
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

double gamma_quantile(double shape, double rate, double p) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::domain_error("gamma_quantile: shape and rate must be > 0");
  if (!(p >= 0.0 && p < 1.0))
    throw std::domain_error("gamma_quantile: p must be in [0, 1)");
  if (p == 0.0) return 0.0;
  // Bracket, then bisect; the CDF is monotone so this is robust for any
  // shape, including the heavily skewed shapes < 1.
  double lo = 0.0;
  double hi = (shape + 10.0 * std::sqrt(shape) + 10.0) / rate;
  while (gamma_cdf(shape, rate, hi) < p) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::runtime_error("gamma_quantile: no bracket");
  }
  // The stop rule must be relative to the bracket itself: deep lower-tail
  // quantiles can sit many orders of magnitude below 1, and an absolute
  // cutoff would return the cutoff instead of the quantile.
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // double precision exhausted
    if (gamma_cdf(shape, rate, mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * z * z;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty())
    throw std::invalid_argument("quantile_sorted: empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("quantile_sorted: p must be in [0, 1]");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

double ks_statistic(std::span<const double> sorted,
                    const std::function<double(double)>& cdf) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("ks_statistic: empty sample");
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sorted[i]);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n) - f;
    const double lo = f - static_cast<double>(i) / static_cast<double>(n);
    d = std::max({d, hi, lo});
  }
  return d;
}

std::vector<double> gaussian_kde(std::span<const double> sample,
                                 std::span<const double> grid) {
  const std::size_t n = sample.size();
  if (n < 2) throw std::invalid_argument("gaussian_kde: need >= 2 points");
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr =
      quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = (sd > 0.0) ? sd : 1.0;
  const double bw =
      0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  const double norm =
      1.0 / (static_cast<double>(n) * bw * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double v : sample) {
      const double z = (grid[g] - v) / bw;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = acc * norm;
  }
  return out;
}

}  // namespace screff
