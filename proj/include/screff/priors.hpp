#pragma once

#include <array>
#include <cmath>
#include <span>

#include "screff/types.hpp"

namespace screff {

/// Independent normal priors on the unconstrained parameter vector.
/// Rate priors are centered at crude pooled event-rate estimates; all other
/// locations default to zero.
struct PriorSpec {
  double coef_sd = 2.5;
  std::array<double, 3> log_rate_mean{0.0, 0.0, 0.0};
  double log_rate_sd = std::log(100.0) / 2.0;
  double log_shape_sd = 2.0;
  double log_frailty_var_mean = 0.0;
  double log_frailty_var_sd = 1.0;
};

/// Data-driven prior centers: for each transition j, log_rate_mean[j-1] =
/// log(events_j / person_time_j) pooled across arms, where person-time is
/// the time at risk on that transition's clock. Throws ConfigError when a
/// transition has no events or no person-time, naming the transition and
/// suggesting a manual override.
PriorSpec derive_hyperparams(std::span<const SubjectRecord> data,
                             const PriorSpec& base = {});

/// Per-coordinate prior means and standard deviations in layout order.
void prior_moments(const ParamLayout& layout, const PriorSpec& spec,
                   std::span<double> mean, std::span<double> sd);

/// Sum of normal log densities of u under the prior.
double log_prior(std::span<const double> u, const ParamLayout& layout,
                 const PriorSpec& spec);

/// Adds the prior's gradient, -(u - mean)/sd^2, into grad.
void add_grad_log_prior(std::span<const double> u, const ParamLayout& layout,
                        const PriorSpec& spec, std::span<double> grad);

}  // namespace screff
