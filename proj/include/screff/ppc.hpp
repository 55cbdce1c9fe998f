#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "screff/estimands.hpp"
#include "screff/rng.hpp"
#include "screff/sampler.hpp"
#include "screff/types.hpp"

namespace screff {

/// One posterior-predictive replicate of the observed study: fresh
/// prior frailties, both arms' outcomes simulated at the given parameter
/// draw, and observed-arm outcomes censored at each subject's replicate
/// censoring time to form records with the same treatment and covariates.
struct ReplicateData {
  std::vector<SubjectRecord> records;
  std::vector<PotentialOutcomeSet> outcomes;  ///< uncensored, both arms
  std::vector<double> frailty;
};

/// Censoring times for the replicate: the observed y_t where follow-up
/// ended by censoring, otherwise the administrative horizon (subjects who
/// died carry no observable censoring time). horizon <= 0 selects the
/// largest observed y_t.
std::vector<double> replicate_censor_times(std::span<const SubjectRecord> data,
                                           double horizon);

ReplicateData generate_replicate(std::span<const SubjectRecord> data,
                                 const ModelParams& params,
                                 std::span<const double> censor_times,
                                 RngStream& rng);

/// Kaplan-Meier survival at each evaluation time: the product of
/// (1 - deaths/at-risk) over distinct event times strictly below it.
std::vector<double> km_estimate(std::span<const double> times,
                                std::span<const int> events,
                                std::span<const double> eval_times);

/// Arm-specific Kaplan-Meier curves of the terminal event over the grid.
std::array<std::vector<double>, 2> km_by_arm(
    std::span<const SubjectRecord> data, const TimeGrid& grid);

/// Always-alive discrepancy at each grid time: 1 when the observed-side
/// always-alive fraction (from imputed outcomes) exceeds the replicate's.
std::vector<int> discrepancy_aa(std::span<const PotentialOutcomeSet> observed,
                                std::span<const PotentialOutcomeSet> replicate,
                                const TimeGrid& grid);

/// Kaplan-Meier discrepancy: 1 where the observed curve exceeds the
/// replicate curve, per arm and grid time.
std::array<std::vector<int>, 2> discrepancy_km(
    const std::array<std::vector<double>, 2>& km_observed,
    std::span<const SubjectRecord> replicate, const TimeGrid& grid);

/// Frailty goodness-of-fit discrepancy: 1 when the observed-side imputed
/// frailties sit farther (in Kolmogorov-Smirnov distance) from the
/// Gamma(1/v, 1/v) prior than the replicate's prior draws do.
int discrepancy_ks(std::span<const double> observed_frailty,
                   std::span<const double> replicate_frailty,
                   double frailty_var);

struct PpcConfig {
  int max_draws = 0;    ///< 0 = use every retained draw, else thin evenly
  double horizon = 0.0; ///< replicate censoring horizon; 0 = max observed y_t
  int n_threads = 0;
};

/// Posterior predictive p-values: per-time always-alive and per-arm
/// Kaplan-Meier tail probabilities, and the frailty fit p-value
/// 1 - mean(KS indicator).
struct PpcReport {
  TimeGrid grid;
  std::vector<double> pppv_aa;                 ///< per grid time
  std::array<std::vector<double>, 2> pppv_km;  ///< per arm, per grid time
  double pppv_ks = 0.0;
  int n_draws = 0;
};

/// Runs the full check. Observed-side imputations reuse the "impute" stage
/// streams (matching the estimation pass draw-for-draw); replicates use
/// streams keyed by (stage_seed(seed, "ppc-replicate"), draw).
PpcReport run_ppc(std::span<const SubjectRecord> data,
                  const PosteriorDraws& draws, const ParamLayout& layout,
                  const TimeGrid& grid, std::uint64_t seed,
                  const PpcConfig& cfg = {});

}  // namespace screff
