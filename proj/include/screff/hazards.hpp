#pragma once

#include <span>

#include "screff/types.hpp"

namespace screff {

/// Inner product of covariates with a transition's coefficients.
double linear_predictor(std::span<const double> x,
                        std::span<const double> coef);

/// Transition hazard at time t for arm z, transition j in {1,2,3}, subject
/// frailty gamma. Transitions 1 and 2 run on the study clock; transition 3
/// is semi-Markov and runs on time since the nonterminal event, so its
/// hazard at t uses u = t - sojourn_origin (sojourn_origin is ignored for
/// j = 1, 2).
///
///   hazard = gamma * rate * shape * u^(shape-1) * exp(x'coef)
double transition_hazard(const ModelParams& params, int z, int j, double t,
                         double sojourn_origin, std::span<const double> x,
                         double gamma);

/// Cumulative transition hazard on (lower limit, t]:
///   gamma * rate * u^shape * exp(x'coef),  u as in transition_hazard.
/// Returns 0 when t equals the transition's lower time limit.
double transition_cum_hazard(const ModelParams& params, int z, int j, double t,
                             double sojourn_origin, std::span<const double> x,
                             double gamma);

/// Weibull scale parameter of transition j's event-time law for a subject
/// with linear predictor xb and frailty gamma:
///   scale = exp(-(log(gamma * rate) + xb) / shape)
/// so that the cumulative hazard is (u / scale)^shape. A zero rate yields
/// an infinite scale, i.e. the transition never fires.
double weibull_event_scale(const TransitionModel& tr, double gamma, double xb);

}  // namespace screff
