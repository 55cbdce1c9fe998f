#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "screff/rng.hpp"
#include "screff/sampler.hpp"
#include "screff/types.hpp"

namespace screff {

/// Draws a subject's frailty from its gamma full conditional,
///   Gamma(1/v + delta_r + delta_t, 1/v + H1(y_r) + H2(y_r) + H3(y_t|y_r)),
/// with v the frailty variance and cumulative hazards at reference frailty.
/// With no exposure (H-sum 0, no events) this reduces to the prior
/// Gamma(1/v, 1/v).
double sample_frailty(const SubjectRecord& s, const ModelParams& params,
                      RngStream& rng);

/// Counts saturation fallbacks in truncated draws (see
/// sample_truncated_weibull); callers may reset and report it.
extern std::atomic<std::uint64_t> truncation_saturation_count;

/// Inverse-CDF draw from Weibull(shape, scale) conditioned on exceeding
/// `lower` (lower = 0 gives the unconditioned law). Exact zero uniforms are
/// rejected so the result strictly exceeds `lower`. If the truncation point
/// carries less than 1e-12 of survival mass the draw saturates: it returns
/// lower * (1 + 1e-9) and increments truncation_saturation_count.
double sample_truncated_weibull(double shape, double scale, double lower,
                                RngStream& rng);

/// Generative core shared by simulation and counterfactual imputation:
/// competing Weibull draws for the first transition (conditioned on
/// exceeding `lower`), then an independent sojourn from the post-onset law
/// when the nonterminal event comes first.
ArmOutcome draw_arm_outcome(std::span<const double> x, double gamma, int z,
                            const ModelParams& params, RngStream& rng,
                            double lower = 0.0);

/// Completes the factual arm's outcomes beyond censoring. Fully observed
/// coordinates pass through unchanged; censored ones are drawn from the
/// model conditioned on the observed data and the subject's frailty.
ArmOutcome impute_factual(const SubjectRecord& s, const ModelParams& params,
                          double gamma, RngStream& rng);

/// Counterfactual arm: same subject and frailty with treatment flipped and
/// no censoring.
ArmOutcome impute_counterfactual(const SubjectRecord& s,
                                 const ModelParams& params, double gamma,
                                 RngStream& rng);

/// Factual + counterfactual outcomes assembled by arm.
PotentialOutcomeSet impute_potential_outcomes(const SubjectRecord& s,
                                              const ModelParams& params,
                                              double gamma, RngStream& rng);

/// Frailties and completed potential outcomes for every retained posterior
/// draw. Each (draw, subject) pair owns an RNG stream keyed by
/// (stage_seed(seed, "impute"), draw, subject), so results are reproducible
/// and independent of threading.
struct ImputationRun {
  std::vector<std::vector<PotentialOutcomeSet>> outcomes;  ///< [draw][subject]
  std::vector<std::vector<double>> frailty;                ///< [draw][subject]
};

/// One draw's imputations. Subject i's stream is keyed by
/// (impute_seed, draw_index, i), so a subset of draws reproduces exactly
/// the rows impute_all would produce for the same indices.
struct DrawImputation {
  std::vector<PotentialOutcomeSet> outcomes;
  std::vector<double> frailty;
};

DrawImputation impute_one_draw(std::span<const SubjectRecord> data,
                               const ModelParams& params,
                               std::uint64_t impute_seed, int draw_index);

ImputationRun impute_all(std::span<const SubjectRecord> data,
                         const PosteriorDraws& draws, const ParamLayout& layout,
                         std::uint64_t seed, int n_threads = 0);

}  // namespace screff
