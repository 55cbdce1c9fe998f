#include "screff/hazards.hpp"

#include <cmath>
#include <stdexcept>

namespace screff {

double linear_predictor(std::span<const double> x,
                        std::span<const double> coef) {
  if (x.size() != coef.size())
    throw std::invalid_argument(
        "linear_predictor: covariate/coefficient length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * coef[k];
  return acc;
}

namespace {

void check_args(const TransitionModel& tr, int z, int j, double gamma) {
  if (z != 0 && z != 1) throw std::domain_error("transition arm must be 0 or 1");
  if (j < 1 || j > 3) throw std::domain_error("transition index must be 1..3");
  if (!(tr.shape > 0.0) || !(tr.rate > 0.0))
    throw std::domain_error("transition shape and rate must be > 0");
  if (!(gamma > 0.0)) throw std::domain_error("frailty must be > 0");
}

// Time on the transition's own clock; j = 3 restarts at the nonterminal
// event time.
double local_time(int j, double t, double sojourn_origin, bool for_hazard) {
  if (j == 3) {
    if (sojourn_origin < 0.0)
      throw std::domain_error("sojourn_origin must be >= 0");
    const double u = t - sojourn_origin;
    if (for_hazard ? !(u > 0.0) : (u < 0.0))
      throw std::domain_error("time must exceed the sojourn origin");
    return u;
  }
  if (for_hazard ? !(t > 0.0) : (t < 0.0))
    throw std::domain_error("time must be positive");
  return t;
}

}  // namespace

double transition_hazard(const ModelParams& params, int z, int j, double t,
                         double sojourn_origin, std::span<const double> x,
                         double gamma) {
  const TransitionModel& tr = params.at(z, j);
  check_args(tr, z, j, gamma);
  const double u = local_time(j, t, sojourn_origin, /*for_hazard=*/true);
  const double xb = linear_predictor(x, tr.coef);
  return gamma * tr.rate * tr.shape * std::pow(u, tr.shape - 1.0) *
         std::exp(xb);
}

double transition_cum_hazard(const ModelParams& params, int z, int j, double t,
                             double sojourn_origin, std::span<const double> x,
                             double gamma) {
  const TransitionModel& tr = params.at(z, j);
  check_args(tr, z, j, gamma);
  const double u = local_time(j, t, sojourn_origin, /*for_hazard=*/false);
  if (u == 0.0) return 0.0;
  const double xb = linear_predictor(x, tr.coef);
  return gamma * tr.rate * std::pow(u, tr.shape) * std::exp(xb);
}

double weibull_event_scale(const TransitionModel& tr, double gamma,
                           double xb) {
  if (!(tr.shape > 0.0)) throw std::domain_error("shape must be > 0");
  if (tr.rate < 0.0 || gamma < 0.0)
    throw std::domain_error("rate and frailty must be >= 0");
  // log(0) = -inf gives an infinite scale: the transition never fires.
  return std::exp(-(std::log(gamma * tr.rate) + xb) / tr.shape);
}

}  // namespace screff
