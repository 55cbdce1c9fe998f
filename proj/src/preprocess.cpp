#include "screff/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace screff {

LogisticFit fit_logistic(std::span<const std::vector<double>> x,
                         std::span<const int> y, int max_iter, double tol) {
  const std::size_t n = x.size();
  if (n == 0 || y.size() != n)
    throw std::invalid_argument("fit_logistic: empty or mismatched inputs");
  const std::size_t p = x[0].size();
  for (const auto& row : x)
    if (row.size() != p)
      throw std::invalid_argument("fit_logistic: ragged design matrix");
  for (int v : y)
    if (v != 0 && v != 1)
      throw std::invalid_argument("fit_logistic: outcomes must be 0/1");

  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd outcome(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t k = 0; k < p; ++k) design(i, k + 1) = x[i][k];
    outcome(i) = y[i];
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  LogisticFit fit;
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      prob(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-10);
    }
    // Newton step in weighted-least-squares form on the working response
    // eta + (y - p)/w.
    Eigen::VectorXd z = eta + (outcome - prob).cwiseQuotient(w);
    Eigen::MatrixXd xtwx =
        design.transpose() * w.asDiagonal() * design;
    Eigen::VectorXd xtwz = design.transpose() * (w.asDiagonal() * z);
    Eigen::LDLT<Eigen::MatrixXd> solver(xtwx);
    if (solver.info() != Eigen::Success)
      throw NumericalError("fit_logistic: singular weighted design matrix");
    Eigen::VectorXd next = solver.solve(xtwz);

    fit.n_iter = iter + 1;
    const double step = (next - beta).cwiseAbs().maxCoeff();
    beta = next;

    Eigen::Index worst;
    if (beta.cwiseAbs().maxCoeff(&worst) > 30.0) {
      const std::string where =
          worst == 0 ? "intercept" : "column " + std::to_string(worst - 1);
      throw NumericalError(
          "fit_logistic: separation suspected (coefficient for " + where +
          " diverged past 30)");
    }
    if (step < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.coef.assign(beta.data(), beta.data() + beta.size());
  return fit;
}

double logistic_predict(std::span<const double> coef,
                        std::span<const double> x) {
  if (coef.size() != x.size() + 1)
    throw std::invalid_argument("logistic_predict: coefficient length");
  double eta = coef[0];
  for (std::size_t k = 0; k < x.size(); ++k) eta += coef[k + 1] * x[k];
  return 1.0 / (1.0 + std::exp(-eta));
}

std::vector<MatchPair> match_nn(std::span<const double> ps_treated,
                                std::span<const double> ps_control,
                                double caliper) {
  if (ps_control.size() < ps_treated.size())
    throw ConfigError("match_nn: fewer controls (" +
                      std::to_string(ps_control.size()) + ") than treated (" +
                      std::to_string(ps_treated.size()) + ")");

  std::vector<int> order(ps_treated.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ps_treated[a] > ps_treated[b];
  });

  std::vector<char> used(ps_control.size(), 0);
  std::vector<MatchPair> pairs;
  pairs.reserve(ps_treated.size());
  for (int t : order) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ps_control.size(); ++c) {
      if (used[c]) continue;
      const double dist = std::abs(ps_treated[t] - ps_control[c]);
      // strict < keeps the smallest control index on exact ties
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(c);
      }
    }
    if (best >= 0 && best_dist <= caliper) {
      used[best] = 1;
      pairs.push_back({t, best});
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const MatchPair& a, const MatchPair& b) {
              return a.treated < b.treated;
            });
  return pairs;
}

StandardizeResult standardize(std::vector<std::vector<double>>& x,
                              std::span<const int> columns_to_scale) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("standardize: empty matrix");
  const std::size_t p = x[0].size();
  for (const auto& row : x)
    if (row.size() != p)
      throw std::invalid_argument("standardize: ragged matrix");
  std::vector<char> scale_col(p, 0);
  for (int c : columns_to_scale) {
    if (c < 0 || static_cast<std::size_t>(c) >= p)
      throw std::invalid_argument("standardize: column index out of range");
    scale_col[c] = 1;
  }

  StandardizeResult res;
  res.offset.assign(p, 0.0);
  res.scale.assign(p, 1.0);
  for (std::size_t k = 0; k < p; ++k) {
    double mean = 0.0;
    for (const auto& row : x) mean += row[k];
    mean /= static_cast<double>(n);
    res.offset[k] = mean;
    if (scale_col[k]) {
      double ss = 0.0;
      for (const auto& row : x) {
        const double d = row[k] - mean;
        ss += d * d;
      }
      const double sd =
          n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      if (!(sd > 0.0))
        throw ConfigError("standardize: column " + std::to_string(k) +
                          " has zero variance and cannot be scaled");
      res.scale[k] = sd;
    }
    for (auto& row : x) row[k] = (row[k] - res.offset[k]) / res.scale[k];
  }
  return res;
}

std::vector<double> standardized_mean_diff(
    std::span<const SubjectRecord> data) {
  if (data.empty()) return {};
  const std::size_t p = data[0].x.size();
  std::vector<double> smd(p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    double sum[2] = {0, 0}, ssq[2] = {0, 0};
    std::size_t cnt[2] = {0, 0};
    for (const auto& s : data) {
      sum[s.z] += s.x[k];
      ++cnt[s.z];
    }
    double mean[2] = {cnt[0] ? sum[0] / cnt[0] : 0.0,
                      cnt[1] ? sum[1] / cnt[1] : 0.0};
    for (const auto& s : data) {
      const double d = s.x[k] - mean[s.z];
      ssq[s.z] += d * d;
    }
    double var[2] = {cnt[0] > 1 ? ssq[0] / (cnt[0] - 1) : 0.0,
                     cnt[1] > 1 ? ssq[1] / (cnt[1] - 1) : 0.0};
    const double denom = std::sqrt((var[0] + var[1]) / 2.0);
    const double diff = std::abs(mean[1] - mean[0]);
    smd[k] = denom > 0.0 ? diff / denom : (diff == 0.0 ? 0.0 : INFINITY);
  }
  return smd;
}

PreprocessResult preprocess_dataset(
    std::span<const SubjectRecord> data,
    std::span<const std::string> covariate_names,
    std::span<const std::string> scale_columns, double caliper) {
  if (data.empty()) throw ConfigError("preprocess: empty dataset");
  const std::size_t p = data[0].x.size();
  if (covariate_names.size() != p)
    throw ConfigError("preprocess: covariate name count does not match data");

  std::vector<int> scale_idx;
  for (const auto& name : scale_columns) {
    auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end())
      throw ConfigError("preprocess: unknown scale column '" + name + "'");
    scale_idx.push_back(
        static_cast<int>(it - covariate_names.begin()));
  }

  std::vector<std::vector<double>> x(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) x[i] = data[i].x;
  const StandardizeResult std_res = standardize(x, scale_idx);

  std::vector<SubjectRecord> transformed(data.begin(), data.end());
  for (std::size_t i = 0; i < data.size(); ++i) transformed[i].x = x[i];

  std::vector<int> z(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) z[i] = data[i].z;
  const LogisticFit fit = fit_logistic(x, z);

  PreprocessReport report;
  report.fit = fit;
  report.offset = std_res.offset;
  report.scale = std_res.scale;
  report.propensity.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    report.propensity[i] = logistic_predict(fit.coef, x[i]);

  std::vector<int> treated_rows, control_rows;
  std::vector<double> ps_t, ps_c;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].z == 1) {
      treated_rows.push_back(static_cast<int>(i));
      ps_t.push_back(report.propensity[i]);
    } else {
      control_rows.push_back(static_cast<int>(i));
      ps_c.push_back(report.propensity[i]);
    }
  }
  const auto pairs = match_nn(ps_t, ps_c, caliper);

  std::vector<char> keep(data.size(), 0);
  for (const auto& pr : pairs) {
    const int ti = treated_rows[pr.treated];
    const int ci = control_rows[pr.control];
    report.pairs.emplace_back(ti, ci);
    keep[ti] = 1;
    keep[ci] = 1;
  }
  report.n_treated = static_cast<int>(treated_rows.size());
  report.n_matched_controls = static_cast<int>(pairs.size());

  PreprocessResult result;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (keep[i]) result.matched.push_back(transformed[i]);
  report.smd_before = standardized_mean_diff(transformed);
  report.smd_after = standardized_mean_diff(result.matched);
  result.report = std::move(report);
  return result;
}

}  // namespace screff
