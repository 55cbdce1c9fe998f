#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "screff/csv.hpp"
#include "screff/estimands.hpp"
#include "screff/sampler.hpp"
#include "screff/types.hpp"

namespace screff {

/// Shared default seed for commands where the user gives none.
inline constexpr std::uint64_t kDefaultSeed = 20260815;

/// JSON text <-> model parameters (schema: frailty_var, covariates,
/// transitions.z{0,1}_t{1,2,3} with shape/rate/coef).
ModelParams params_from_json_text(const std::string& text,
                                  std::vector<std::string>* covariate_names);
std::string params_to_json_text(const ModelParams& params,
                                std::span<const std::string> covariate_names);

/// Built-in generator parameters for `simulate` demos: one normal and one
/// binary covariate, moderate treatment benefit, frailty variance 0.5.
ModelParams demo_params();

/// Grid selection: explicit times win; otherwise grid_max/grid_k equal
/// spacing; otherwise the data-driven default.
struct GridSpec {
  std::vector<double> times;
  double grid_max = 0.0;
  int grid_k = 0;
};

TimeGrid resolve_grid(const GridSpec& spec,
                      std::span<const SubjectRecord> data);

struct SimulateArgs {
  std::string out_dir = "out";
  std::uint64_t seed = kDefaultSeed;
  int n = 200;
  std::string params_file;  ///< empty = demo_params()
  int n_normal = 1;         ///< standard-normal covariate columns
  int n_binary = 1;         ///< Bernoulli covariate columns
  double binary_p = 0.5;
  double treat_prob = 0.5;
  double c_admin = 90.0;       ///< <= 0 disables administrative censoring
  double c_uniform_max = 0.0;  ///< <= 0 disables uniform censoring
  std::string frailty_dist = "gamma";  ///< or "lognormal"
};

struct PreprocessArgs {
  std::string input;
  std::string out_dir = "out";
  std::vector<std::string> scale_columns;
  double caliper = 0.0;  ///< <= 0 = no caliper
};

struct FitArgs {
  std::string input;
  std::string out_dir = "out";
  std::uint64_t seed = kDefaultSeed;
  int chains = 4;
  int iter = 4000;
  int warmup = 3000;
  int max_depth = 10;
  double target_accept = 0.8;
  bool parallel = true;
};

struct EstimateArgs {
  std::string data;
  std::string fit_dir;
  std::string out_dir = "out";
  std::uint64_t seed = kDefaultSeed;
  GridSpec grid;
  int max_draws = 0;  ///< 0 = all retained draws
  bool write_potential_outcomes = false;
  int n_threads = 0;
};

struct PpcArgs {
  std::string data;
  std::string fit_dir;
  std::string out_dir = "out";
  std::uint64_t seed = kDefaultSeed;
  GridSpec grid;
  int max_draws = 500;
  double horizon = 0.0;  ///< replicate censoring horizon; 0 = max observed y_t
  int n_threads = 0;
};

struct ReportArgs {
  std::string data;
  std::string fit_dir;
  std::string out_dir = "out";
  std::uint64_t seed = kDefaultSeed;
  GridSpec grid;
  int max_draws = 0;
  int profile_reps = 20;  ///< outcome pairs per draw for profile rows
  std::vector<double> profile_x;  ///< covariate profile; empty = zeros
  int n_threads = 0;
};

/// Each command returns a process exit code: 0 success, 2 validation
/// failure, 3 numerical failure. Errors are reported on stderr.
int cmd_simulate(const SimulateArgs& args);
int cmd_preprocess(const PreprocessArgs& args);
int cmd_fit(const FitArgs& args);
int cmd_estimate(const EstimateArgs& args);
int cmd_ppc(const PpcArgs& args);
int cmd_report(const ReportArgs& args);

/// Posterior draws reloaded from a fit directory (draws.csv +
/// fit_config.json): layout, covariate names, and the unconstrained rows.
struct FitArtifacts {
  PosteriorDraws draws;
  ParamLayout layout;
  std::vector<std::string> covariate_names;
};

FitArtifacts load_fit(const std::string& fit_dir);

}  // namespace screff
