#include "screff/types.hpp"

#include <cmath>

namespace screff {

void validate(const SubjectRecord& s) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("subject '" + s.id + "': " + why);
  };
  if (s.z != 0 && s.z != 1) fail("z must be 0 or 1");
  if (s.delta_r != 0 && s.delta_r != 1) fail("delta_r must be 0 or 1");
  if (s.delta_t != 0 && s.delta_t != 1) fail("delta_t must be 0 or 1");
  if (!(s.y_r > 0.0) || !std::isfinite(s.y_r))
    fail("y_r must be a positive finite time");
  if (!(s.y_t > 0.0) || !std::isfinite(s.y_t))
    fail("y_t must be a positive finite time");
  if (s.y_r > s.y_t) fail("y_r must not exceed y_t");
  if (s.delta_r == 0 && s.y_r != s.y_t)
    fail("y_r must equal y_t when the nonterminal event is unobserved");
  if (s.delta_r == 1 && s.delta_t == 1 && !(s.y_r < s.y_t))
    fail("y_t must exceed y_r when both events are observed");
  for (double v : s.x)
    if (!std::isfinite(v)) fail("covariates must be finite");
}

void validate(const ModelParams& p) {
  const std::size_t n_coef = p.transitions[0].coef.size();
  for (int z = 0; z <= 1; ++z) {
    for (int j = 1; j <= 3; ++j) {
      const TransitionModel& tr = p.at(z, j);
      if (!(tr.shape > 0.0) || !std::isfinite(tr.shape))
        throw ConfigError("transition shape must be strictly positive");
      if (!(tr.rate > 0.0) || !std::isfinite(tr.rate))
        throw ConfigError("transition rate must be strictly positive");
      if (tr.coef.size() != n_coef)
        throw ConfigError("all transitions must share one coefficient length");
      for (double b : tr.coef)
        if (!std::isfinite(b)) throw ConfigError("coefficients must be finite");
    }
  }
  if (!(p.frailty_var > 0.0) || !std::isfinite(p.frailty_var))
    throw ConfigError("frailty_var must be strictly positive");
}

ModelParams ParamLayout::constrain(std::span<const double> u) const {
  if (static_cast<int>(u.size()) != dim())
    throw std::invalid_argument("ParamLayout::constrain: wrong vector length");
  ModelParams out;
  for (int z = 0; z <= 1; ++z) {
    for (int j = 1; j <= 3; ++j) {
      TransitionModel& tr = out.at(z, j);
      tr.rate = std::exp(u[log_rate(z, j)]);
      tr.shape = std::exp(u[log_shape(z, j)]);
      tr.coef.resize(p);
      for (int k = 0; k < p; ++k) tr.coef[k] = u[coef(z, j, k)];
    }
  }
  out.frailty_var = std::exp(u[log_frailty_var()]);
  return out;
}

std::vector<double> ParamLayout::unconstrain(const ModelParams& params) const {
  if (params.n_covariates() != p)
    throw std::invalid_argument("ParamLayout::unconstrain: covariate mismatch");
  std::vector<double> u(dim());
  for (int z = 0; z <= 1; ++z) {
    for (int j = 1; j <= 3; ++j) {
      const TransitionModel& tr = params.at(z, j);
      u[log_rate(z, j)] = std::log(tr.rate);
      u[log_shape(z, j)] = std::log(tr.shape);
      for (int k = 0; k < p; ++k) u[coef(z, j, k)] = tr.coef[k];
    }
  }
  u[log_frailty_var()] = std::log(params.frailty_var);
  return u;
}

std::vector<std::string> ParamLayout::parameter_names(
    std::span<const std::string> covariate_names) const {
  if (static_cast<int>(covariate_names.size()) != p)
    throw std::invalid_argument("parameter_names: covariate name mismatch");
  std::vector<std::string> names(dim());
  for (int z = 0; z <= 1; ++z) {
    for (int j = 1; j <= 3; ++j) {
      const std::string tag = "_z" + std::to_string(z) + "_t" + std::to_string(j);
      names[log_rate(z, j)] = "rate" + tag;
      names[log_shape(z, j)] = "shape" + tag;
      for (int k = 0; k < p; ++k)
        names[coef(z, j, k)] = "coef" + tag + "_" + covariate_names[k];
    }
  }
  names[log_frailty_var()] = "frailty_var";
  return names;
}

PrincipalState principal_state(const PotentialOutcomeSet& po, double t) {
  const bool alive0 = po.t0 > t;
  const bool alive1 = po.t1 > t;
  if (alive0 && alive1) return PrincipalState::AlwaysAlive;
  if (alive0 && !alive1) return PrincipalState::TreatmentKilled;
  if (!alive0 && alive1) return PrincipalState::ControlKilled;
  return PrincipalState::DoomedDead;
}

EventPattern event_pattern(int delta_r, int delta_t) {
  if (delta_r == 0 && delta_t == 0) return EventPattern::Neither;
  if (delta_r == 1 && delta_t == 0) return EventPattern::NonterminalOnly;
  if (delta_r == 0 && delta_t == 1) return EventPattern::TerminalOnly;
  return EventPattern::Both;
}

}  // namespace screff
