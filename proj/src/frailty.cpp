#include "screff/frailty.hpp"

#include <cmath>

#include "screff/hazards.hpp"
#include "screff/parallel.hpp"

namespace screff {

std::atomic<std::uint64_t> truncation_saturation_count{0};

double sample_frailty(const SubjectRecord& s, const ModelParams& params,
                      RngStream& rng) {
  validate(s);
  const std::span<const double> x(s.x);
  const double inv_v = 1.0 / params.frailty_var;
  double cum = transition_cum_hazard(params, s.z, 1, s.y_r, 0.0, x, 1.0) +
               transition_cum_hazard(params, s.z, 2, s.y_r, 0.0, x, 1.0);
  if (s.delta_r)
    cum += transition_cum_hazard(params, s.z, 3, s.y_t, s.y_r, x, 1.0);
  return rng.gamma(inv_v + s.delta_r + s.delta_t, inv_v + cum);
}

double sample_truncated_weibull(double shape, double scale, double lower,
                                RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::domain_error("sample_truncated_weibull: shape/scale must be > 0");
  if (lower < 0.0)
    throw std::domain_error("sample_truncated_weibull: lower must be >= 0");
  // Cumulative hazard at the truncation point; survival there is exp(-hL).
  const double h_lower = lower > 0.0 ? std::pow(lower / scale, shape) : 0.0;
  if (h_lower > -std::log(1e-12)) {
    truncation_saturation_count.fetch_add(1, std::memory_order_relaxed);
    return lower * (1.0 + 1e-9);
  }
  // Inverse CDF on the conditional law: survival S(t) = (1-u) * S(lower)
  // <=> (t/scale)^shape = hL - log(1-u). u > 0 keeps the draw strictly
  // above the bound.
  const double u = rng.uniform_pos();
  return scale * std::pow(h_lower - std::log1p(-u), 1.0 / shape);
}

ArmOutcome draw_arm_outcome(std::span<const double> x, double gamma, int z,
                            const ModelParams& params, RngStream& rng,
                            double lower) {
  auto scale_of = [&](int j) {
    const TransitionModel& tr = params.at(z, j);
    return weibull_event_scale(tr, gamma, linear_predictor(x, tr.coef));
  };
  const double r_cand =
      sample_truncated_weibull(params.at(z, 1).shape, scale_of(1), lower, rng);
  const double t_cand =
      sample_truncated_weibull(params.at(z, 2).shape, scale_of(2), lower, rng);
  if (t_cand < r_cand) return {std::nullopt, t_cand};
  const double sojourn =
      sample_truncated_weibull(params.at(z, 3).shape, scale_of(3), 0.0, rng);
  return {r_cand, r_cand + sojourn};
}

ArmOutcome impute_factual(const SubjectRecord& s, const ModelParams& params,
                          double gamma, RngStream& rng) {
  validate(s);
  if (!(gamma > 0.0)) throw std::domain_error("frailty must be > 0");
  const std::span<const double> x(s.x);
  auto scale_of = [&](int j) {
    const TransitionModel& tr = params.at(s.z, j);
    return weibull_event_scale(tr, gamma, linear_predictor(x, tr.coef));
  };

  if (s.delta_r && s.delta_t) return {s.y_r, s.y_t};
  // Death without the nonterminal event settles both coordinates: the
  // nonterminal event can no longer occur.
  if (!s.delta_r && s.delta_t) return {std::nullopt, s.y_t};

  if (s.delta_r && !s.delta_t) {
    // Onset observed at y_r, follow-up censored at y_t: extend the sojourn
    // beyond the y_t - y_r already survived.
    const double sojourn = sample_truncated_weibull(
        params.at(s.z, 3).shape, scale_of(3), s.y_t - s.y_r, rng);
    return {s.y_r, s.y_r + sojourn};
  }

  // Censored before either event at y_r (= y_t): competing draws beyond the
  // censoring time decide which event would have come first.
  return draw_arm_outcome(x, gamma, s.z, params, rng, s.y_r);
}

ArmOutcome impute_counterfactual(const SubjectRecord& s,
                                 const ModelParams& params, double gamma,
                                 RngStream& rng) {
  validate(s);
  if (!(gamma > 0.0)) throw std::domain_error("frailty must be > 0");
  return draw_arm_outcome(s.x, gamma, 1 - s.z, params, rng, 0.0);
}

PotentialOutcomeSet impute_potential_outcomes(const SubjectRecord& s,
                                              const ModelParams& params,
                                              double gamma, RngStream& rng) {
  const ArmOutcome fact = impute_factual(s, params, gamma, rng);
  const ArmOutcome cf = impute_counterfactual(s, params, gamma, rng);
  PotentialOutcomeSet po;
  if (s.z == 0) {
    po.r0 = fact.r;
    po.t0 = fact.t;
    po.r1 = cf.r;
    po.t1 = cf.t;
  } else {
    po.r1 = fact.r;
    po.t1 = fact.t;
    po.r0 = cf.r;
    po.t0 = cf.t;
  }
  return po;
}

DrawImputation impute_one_draw(std::span<const SubjectRecord> data,
                               const ModelParams& params,
                               std::uint64_t impute_seed, int draw_index) {
  const int n = static_cast<int>(data.size());
  DrawImputation out;
  out.outcomes.resize(n);
  out.frailty.resize(n);
  for (int i = 0; i < n; ++i) {
    RngStream rng(impute_seed, static_cast<std::uint64_t>(draw_index),
                  static_cast<std::uint64_t>(i));
    out.frailty[i] = sample_frailty(data[i], params, rng);
    out.outcomes[i] =
        impute_potential_outcomes(data[i], params, out.frailty[i], rng);
  }
  return out;
}

ImputationRun impute_all(std::span<const SubjectRecord> data,
                         const PosteriorDraws& draws, const ParamLayout& layout,
                         std::uint64_t seed, int n_threads) {
  const int n_draws = draws.total_rows();
  const std::uint64_t impute_seed = stage_seed(seed, "impute");

  ImputationRun run;
  run.outcomes.resize(n_draws);
  run.frailty.resize(n_draws);
  parallel_for(
      n_draws,
      [&](int b) {
        const ModelParams params = layout.constrain(draws.row(b));
        DrawImputation one = impute_one_draw(data, params, impute_seed, b);
        run.outcomes[b] = std::move(one.outcomes);
        run.frailty[b] = std::move(one.frailty);
      },
      n_threads);
  return run;
}

}  // namespace screff
