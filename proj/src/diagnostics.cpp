#include "screff/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace screff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Views of the half-chains after splitting each chain in two.
struct SplitChains {
  std::vector<const double*> start;
  int len = 0;
};

SplitChains split(std::span<const double> values, int n_chains, int len) {
  if (n_chains < 1 || len < 4)
    throw std::invalid_argument("diagnostics: need chains of length >= 4");
  if (values.size() != static_cast<std::size_t>(n_chains) * len)
    throw std::invalid_argument("diagnostics: value buffer size mismatch");
  SplitChains out;
  out.len = len / 2;
  for (int c = 0; c < n_chains; ++c) {
    const double* chain = values.data() + static_cast<std::size_t>(c) * len;
    out.start.push_back(chain);                  // first half
    out.start.push_back(chain + (len - out.len));  // last half
  }
  return out;
}

double chain_mean(const double* x, int n) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m += x[i];
  return m / n;
}

// Between/within variances of the split chains; returns false when the
// within-chain variance vanishes.
bool variance_components(const SplitChains& sc, double& w, double& b_over_n,
                         std::vector<double>& means) {
  const int m = static_cast<int>(sc.start.size());
  const int n = sc.len;
  means.resize(m);
  w = 0.0;
  for (int j = 0; j < m; ++j) {
    means[j] = chain_mean(sc.start[j], n);
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sc.start[j][i] - means[j];
      ss += d * d;
    }
    w += ss / (n - 1.0);
  }
  w /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double bs = 0.0;
  for (double mu : means) bs += (mu - grand) * (mu - grand);
  b_over_n = m > 1 ? bs / (m - 1.0) : 0.0;  // = B/n in the usual notation
  return w > 0.0;
}

}  // namespace

double split_rhat(std::span<const double> values, int n_chains, int len) {
  const SplitChains sc = split(values, n_chains, len);
  double w, b_over_n;
  std::vector<double> means;
  if (!variance_components(sc, w, b_over_n, means)) return kInf;
  const double n = sc.len;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double split_ess(std::span<const double> values, int n_chains, int len) {
  const SplitChains sc = split(values, n_chains, len);
  const int m = static_cast<int>(sc.start.size());
  const int n = sc.len;
  double w, b_over_n;
  std::vector<double> means;
  if (!variance_components(sc, w, b_over_n, means)) return kInf;
  const double var_plus = (n - 1.0) / n * w + b_over_n;

  // Mean over chains of the lag-t autocovariance (1/n normalization).
  auto acov = [&](int t) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      const double* x = sc.start[j];
      double s = 0.0;
      for (int i = 0; i + t < n; ++i)
        s += (x[i] - means[j]) * (x[i + t] - means[j]);
      acc += s / n;
    }
    return acc / m;
  };

  auto rho = [&](int t) { return 1.0 - (w - acov(t)) / var_plus; };

  // Initial monotone positive sequence over lag pairs.
  double tau = 0.0;
  double prev_pair = kInf;
  double rho0 = 1.0;
  for (int t = 0; t + 1 < n; t += 2) {
    const double r_even = (t == 0) ? rho0 : rho(t);
    const double r_odd = rho(t + 1);
    double pair = r_even + r_odd;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += pair;
  }
  const double tau_hat = std::max(2.0 * tau - 1.0, 1e-12);
  return static_cast<double>(m) * n / tau_hat;
}

double gelman_rubin(const PosteriorDraws& draws, int param_index) {
  const std::vector<double> col = draws.column(param_index);
  return split_rhat(col, draws.n_chains, draws.n_kept);
}

double effective_sample_size(const PosteriorDraws& draws, int param_index) {
  const std::vector<double> col = draws.column(param_index);
  return split_ess(col, draws.n_chains, draws.n_kept);
}

}  // namespace screff
