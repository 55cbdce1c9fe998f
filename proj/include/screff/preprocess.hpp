#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "screff/types.hpp"

namespace screff {

/// Logistic regression fit by iteratively reweighted least squares. The
/// design matrix gains a leading intercept column, so coef[0] is the
/// intercept and coef[1..p] follow the input column order.
struct LogisticFit {
  std::vector<double> coef;
  int n_iter = 0;
  bool converged = false;
};

/// Maximum-likelihood fit of P(y=1|x) = logistic(coef[0] + x'coef[1..]).
/// Stops when the largest coefficient change drops below `tol` or after
/// `max_iter` sweeps. A coefficient diverging past 30 in absolute value is
/// treated as separation and reported with its column.
LogisticFit fit_logistic(std::span<const std::vector<double>> x,
                         std::span<const int> y, int max_iter = 50,
                         double tol = 1e-10);

/// logistic(coef[0] + x'coef[1..]).
double logistic_predict(std::span<const double> coef,
                        std::span<const double> x);

struct MatchPair {
  int treated;  ///< index into the treated propensity list
  int control;  ///< index into the control propensity list
};

/// Greedy 1:1 nearest-neighbor matching without replacement: treated units
/// processed in descending propensity order (earlier index first on ties),
/// each matched to the unused control with the smallest absolute propensity
/// difference (smallest control index on ties). A finite caliper drops
/// treated units with no unused control within it.
std::vector<MatchPair> match_nn(
    std::span<const double> ps_treated, std::span<const double> ps_control,
    double caliper = std::numeric_limits<double>::infinity());

/// Mean-centers every column of `x` in place; columns listed in
/// `columns_to_scale` are additionally divided by their sample standard
/// deviation (denominator n-1). Returns per-column offsets and scales
/// (scale 1 for centered-only columns).
struct StandardizeResult {
  std::vector<double> offset;
  std::vector<double> scale;
};

StandardizeResult standardize(std::vector<std::vector<double>>& x,
                              std::span<const int> columns_to_scale);

/// Absolute standardized mean difference per covariate between arms:
/// |mean_1 - mean_0| / sqrt((var_1 + var_0) / 2).
std::vector<double> standardized_mean_diff(
    std::span<const SubjectRecord> data);

struct PreprocessReport {
  LogisticFit fit;
  std::vector<double> propensity;        ///< per input record
  std::vector<std::pair<int, int>> pairs;  ///< (treated, control) record indices
  std::vector<double> offset;            ///< per covariate
  std::vector<double> scale;
  std::vector<double> smd_before;
  std::vector<double> smd_after;
  int n_treated = 0;
  int n_matched_controls = 0;
};

/// Full preprocessing pass: center/scale covariates (named columns scaled
/// to unit standard deviation), fit the propensity model on the transformed
/// covariates, match, and return the matched records in original dataset
/// order alongside the report.
struct PreprocessResult {
  std::vector<SubjectRecord> matched;
  PreprocessReport report;
};

PreprocessResult preprocess_dataset(
    std::span<const SubjectRecord> data,
    std::span<const std::string> covariate_names,
    std::span<const std::string> scale_columns,
    double caliper = std::numeric_limits<double>::infinity());

}  // namespace screff
