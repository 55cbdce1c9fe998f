#include "screff/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "screff/hazards.hpp"

namespace screff {

std::vector<std::string> CovariateSpec::names() const {
  std::vector<std::string> out;
  for (int k = 0; k < total(); ++k)
    out.push_back("x" + std::to_string(k + 1));
  return out;
}

void validate(const SimConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("simulate: n must be >= 1");
  if (cfg.covariates.n_normal < 0 || cfg.covariates.n_binary < 0)
    throw ConfigError("simulate: covariate counts must be >= 0");
  if (!(cfg.covariates.binary_p > 0.0 && cfg.covariates.binary_p < 1.0))
    throw ConfigError("simulate: binary_p must be in (0, 1)");
  if (!cfg.treat_logit &&
      !(cfg.treat_prob > 0.0 && cfg.treat_prob < 1.0))
    throw ConfigError("simulate: treat_prob must be in (0, 1)");
  if (cfg.treat_logit &&
      static_cast<int>(cfg.treat_logit->size()) != cfg.covariates.total() + 1)
    throw ConfigError(
        "simulate: treat_logit needs intercept + one slope per covariate");
  if (cfg.c_admin && !(*cfg.c_admin > 0.0))
    throw ConfigError("simulate: c_admin must be > 0");
  if (cfg.c_uniform_max && !(*cfg.c_uniform_max > 0.0))
    throw ConfigError("simulate: c_uniform_max must be > 0");
  if (!(cfg.params.frailty_var > 0.0))
    throw ConfigError("simulate: frailty_var must be > 0");
  if (cfg.params.n_covariates() != cfg.covariates.total())
    throw ConfigError("simulate: params covariate count must match generator");
}

ArmOutcome simulate_arm(std::span<const double> x, double gamma, int z,
                        const ModelParams& params, RngStream& rng) {
  return draw_arm_outcome(x, gamma, z, params, rng, 0.0);
}

SimResult simulate_dataset(const SimConfig& cfg) {
  validate(cfg);
  const std::uint64_t sim_seed = stage_seed(cfg.seed, "simulate");
  const int p = cfg.covariates.total();
  // Mean-one frailty matching the configured variance:
  // LogNormal(-s/2, s) with s = log(1 + var) has mean 1, variance var.
  const double ln_s2 = std::log1p(cfg.params.frailty_var);

  SimResult out;
  out.covariate_names = cfg.covariates.names();
  out.records.reserve(cfg.n);
  out.truth.reserve(cfg.n);
  out.frailty.reserve(cfg.n);

  int id_width = 1;
  for (int v = cfg.n; v >= 10; v /= 10) ++id_width;

  for (int i = 0; i < cfg.n; ++i) {
    RngStream rng(sim_seed, static_cast<std::uint64_t>(i));

    std::vector<double> x(p);
    for (int k = 0; k < cfg.covariates.n_normal; ++k) x[k] = rng.normal();
    for (int k = 0; k < cfg.covariates.n_binary; ++k)
      x[cfg.covariates.n_normal + k] = rng.bernoulli(cfg.covariates.binary_p);

    double gamma;
    if (cfg.frailty_dist == SimConfig::FrailtyDist::Gamma) {
      const double inv_v = 1.0 / cfg.params.frailty_var;
      gamma = rng.gamma(inv_v, inv_v);
    } else {
      gamma = std::exp(-0.5 * ln_s2 + std::sqrt(ln_s2) * rng.normal());
    }

    int z;
    if (cfg.treat_logit) {
      double eta = (*cfg.treat_logit)[0];
      for (int k = 0; k < p; ++k) eta += (*cfg.treat_logit)[k + 1] * x[k];
      z = rng.bernoulli(1.0 / (1.0 + std::exp(-eta)));
    } else {
      z = rng.bernoulli(cfg.treat_prob);
    }

    // Both arms share the subject's frailty; the factual arm is censored.
    const ArmOutcome arm0 = simulate_arm(x, gamma, 0, cfg.params, rng);
    const ArmOutcome arm1 = simulate_arm(x, gamma, 1, cfg.params, rng);
    const ArmOutcome& fact = (z == 0) ? arm0 : arm1;

    double censor = std::numeric_limits<double>::infinity();
    if (cfg.c_admin) censor = *cfg.c_admin;
    if (cfg.c_uniform_max)
      censor = std::min(censor, rng.uniform_pos() * *cfg.c_uniform_max);

    SubjectRecord rec;
    {
      std::string num = std::to_string(i + 1);
      rec.id = "s" + std::string(id_width - num.size(), '0') + num;
    }
    rec.z = z;
    rec.x = x;
    rec.delta_t = fact.t <= censor ? 1 : 0;
    rec.y_t = std::min(fact.t, censor);
    rec.delta_r = (fact.r && *fact.r <= censor) ? 1 : 0;
    rec.y_r = rec.delta_r ? *fact.r : rec.y_t;
    validate(rec);

    out.records.push_back(std::move(rec));
    out.truth.push_back(PotentialOutcomeSet{arm0.r, arm1.r, arm0.t, arm1.t});
    out.frailty.push_back(gamma);
  }
  return out;
}

}  // namespace screff
