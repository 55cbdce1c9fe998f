#include "screff/priors.hpp"

#include <cmath>
#include <string>

#include "screff/numeric.hpp"

namespace screff {

PriorSpec derive_hyperparams(std::span<const SubjectRecord> data,
                             const PriorSpec& base) {
  if (data.empty()) throw ConfigError("derive_hyperparams: empty dataset");
  double events[3] = {0.0, 0.0, 0.0};
  double person_time[3] = {0.0, 0.0, 0.0};
  for (const SubjectRecord& s : data) {
    validate(s);
    events[0] += s.delta_r;
    events[1] += s.delta_t * (1 - s.delta_r);
    events[2] += s.delta_r * s.delta_t;
    person_time[0] += s.y_r;
    person_time[1] += s.y_r;
    person_time[2] += s.delta_r ? (s.y_t - s.y_r) : 0.0;
  }
  PriorSpec spec = base;
  for (int j = 0; j < 3; ++j) {
    const std::string tag = std::to_string(j + 1);
    if (events[j] < 1.0)
      throw ConfigError("transition " + tag +
                        " has no observed events; set its prior rate center "
                        "manually (prior_log_rate_mean)");
    if (!(person_time[j] > 0.0))
      throw ConfigError("transition " + tag +
                        " has no person-time at risk; set its prior rate "
                        "center manually (prior_log_rate_mean)");
    spec.log_rate_mean[j] = std::log(events[j] / person_time[j]);
  }
  return spec;
}

void prior_moments(const ParamLayout& layout, const PriorSpec& spec,
                   std::span<double> mean, std::span<double> sd) {
  if (static_cast<int>(mean.size()) != layout.dim() || sd.size() != mean.size())
    throw std::invalid_argument("prior_moments: dimension mismatch");
  for (int z = 0; z <= 1; ++z) {
    for (int j = 1; j <= 3; ++j) {
      mean[layout.log_rate(z, j)] = spec.log_rate_mean[j - 1];
      sd[layout.log_rate(z, j)] = spec.log_rate_sd;
      mean[layout.log_shape(z, j)] = 0.0;
      sd[layout.log_shape(z, j)] = spec.log_shape_sd;
      for (int k = 0; k < layout.p; ++k) {
        mean[layout.coef(z, j, k)] = 0.0;
        sd[layout.coef(z, j, k)] = spec.coef_sd;
      }
    }
  }
  mean[layout.log_frailty_var()] = spec.log_frailty_var_mean;
  sd[layout.log_frailty_var()] = spec.log_frailty_var_sd;
}

double log_prior(std::span<const double> u, const ParamLayout& layout,
                 const PriorSpec& spec) {
  if (static_cast<int>(u.size()) != layout.dim())
    throw std::invalid_argument("log_prior: dimension mismatch");
  std::vector<double> mean(u.size()), sd(u.size());
  prior_moments(layout, spec, mean, sd);
  double total = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k)
    total += normal_logpdf(u[k], mean[k], sd[k]);
  return total;
}

void add_grad_log_prior(std::span<const double> u, const ParamLayout& layout,
                        const PriorSpec& spec, std::span<double> grad) {
  if (u.size() != grad.size() || static_cast<int>(u.size()) != layout.dim())
    throw std::invalid_argument("add_grad_log_prior: dimension mismatch");
  std::vector<double> mean(u.size()), sd(u.size());
  prior_moments(layout, spec, mean, sd);
  for (std::size_t k = 0; k < u.size(); ++k)
    grad[k] -= (u[k] - mean[k]) / (sd[k] * sd[k]);
}

}  // namespace screff
