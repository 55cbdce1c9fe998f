#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screff/frailty.hpp"
#include "screff/types.hpp"

namespace screff {

/// Covariate generator: n_normal standard-normal columns followed by
/// n_binary Bernoulli(binary_p) columns, named x1..xp.
struct CovariateSpec {
  int n_normal = 1;
  int n_binary = 1;
  double binary_p = 0.5;

  int total() const { return n_normal + n_binary; }
  std::vector<std::string> names() const;
};

/// Ground-truth generator configuration.
struct SimConfig {
  int n = 200;
  ModelParams params;
  CovariateSpec covariates;
  double treat_prob = 0.5;
  /// Optional logistic treatment assignment: [intercept, slopes...]; when
  /// set it replaces treat_prob.
  std::optional<std::vector<double>> treat_logit;
  std::optional<double> c_admin;        ///< administrative censoring time
  std::optional<double> c_uniform_max;  ///< independent Uniform(0, max) censoring
  enum class FrailtyDist { Gamma, LogNormal };
  /// LogNormal draws share the frailty mean 1 and variance frailty_var but
  /// have a different shape; used for misspecification studies.
  FrailtyDist frailty_dist = FrailtyDist::Gamma;
  std::uint64_t seed = 0;
};

void validate(const SimConfig& cfg);

/// One arm's latent outcomes for a subject: competing Weibull first-event
/// draw, then an independent sojourn when the nonterminal event comes first.
ArmOutcome simulate_arm(std::span<const double> x, double gamma, int z,
                        const ModelParams& params, RngStream& rng);

/// A simulated dataset plus its generating truth.
struct SimResult {
  std::vector<SubjectRecord> records;
  std::vector<PotentialOutcomeSet> truth;  ///< latent outcomes, both arms
  std::vector<double> frailty;
  std::vector<std::string> covariate_names;
};

/// Draws covariates, frailty, treatment, both arms' outcomes (shared
/// frailty), and applies censoring to the factual arm to form the observed
/// records. Each subject owns an RNG stream keyed by
/// (stage_seed(seed, "simulate"), subject).
SimResult simulate_dataset(const SimConfig& cfg);

}  // namespace screff
