#include "screff/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "screff/hazards.hpp"

namespace screff {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log1p(x)/x, series-expanded near zero so the frailty-variance -> 0 limit
// of (1/v) * log1p(v * H) stays accurate.
inline double log1p_ratio(double x) {
  if (x < 1e-4) return 1.0 - x / 2.0 + x * x / 3.0;
  return std::log1p(x) / x;
}

}  // namespace

double conditional_loglik(const SubjectRecord& s, double gamma,
                          const ModelParams& params) {
  validate(s);
  if (!(gamma > 0.0)) throw std::domain_error("frailty must be > 0");
  const std::span<const double> x(s.x);
  double ll = 0.0;
  if (s.delta_r)
    ll += std::log(transition_hazard(params, s.z, 1, s.y_r, 0.0, x, gamma));
  if (s.delta_t && !s.delta_r)
    ll += std::log(transition_hazard(params, s.z, 2, s.y_r, 0.0, x, gamma));
  if (s.delta_r && s.delta_t)
    ll += std::log(transition_hazard(params, s.z, 3, s.y_t, s.y_r, x, gamma));
  ll -= transition_cum_hazard(params, s.z, 1, s.y_r, 0.0, x, gamma);
  ll -= transition_cum_hazard(params, s.z, 2, s.y_r, 0.0, x, gamma);
  if (s.delta_r)
    ll -= transition_cum_hazard(params, s.z, 3, s.y_t, s.y_r, x, gamma);
  return ll;
}

double marginal_loglik(const SubjectRecord& s, const ModelParams& params) {
  return marginal_case_contribution(s, params).loglik;
}

CaseContribution marginal_case_contribution(const SubjectRecord& s,
                                            const ModelParams& params) {
  validate(s);
  const std::span<const double> x(s.x);
  const double v = params.frailty_var;
  const double d = static_cast<double>(s.delta_r + s.delta_t);

  // Hazards at reference frailty 1; the frailty enters only through the
  // integrated-out survival factor.
  double ll = 0.0;
  if (s.delta_r && s.delta_t) ll += std::log1p(v);
  if (s.delta_r)
    ll += std::log(transition_hazard(params, s.z, 1, s.y_r, 0.0, x, 1.0));
  if (s.delta_t && !s.delta_r)
    ll += std::log(transition_hazard(params, s.z, 2, s.y_r, 0.0, x, 1.0));
  if (s.delta_r && s.delta_t)
    ll += std::log(transition_hazard(params, s.z, 3, s.y_t, s.y_r, x, 1.0));

  double cum = transition_cum_hazard(params, s.z, 1, s.y_r, 0.0, x, 1.0) +
               transition_cum_hazard(params, s.z, 2, s.y_r, 0.0, x, 1.0);
  if (s.delta_r)
    cum += transition_cum_hazard(params, s.z, 3, s.y_t, s.y_r, x, 1.0);

  const double vh = v * cum;
  const double lp = std::log1p(vh);
  if (!std::isfinite(lp)) {
    ll = kNegInf;
  } else {
    // (1/v) * log1p(v*cum) = cum * log1p_ratio(v*cum), stable for small v.
    ll -= cum * log1p_ratio(vh) + d * lp;
  }
  return {event_pattern(s.delta_r, s.delta_t), ll};
}

double total_marginal_loglik(std::span<const SubjectRecord> data,
                             const ModelParams& params) {
  if (data.empty()) throw ConfigError("dataset is empty");
  // Summing in sorted order makes the result exactly invariant under
  // permutations of the subjects (the summands form the same multiset).
  std::vector<double> terms;
  terms.reserve(data.size());
  for (const SubjectRecord& s : data) terms.push_back(marginal_loglik(s, params));
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

double grad_total_marginal_loglik(std::span<const SubjectRecord> data,
                                  const ParamLayout& layout,
                                  std::span<const double> u,
                                  std::span<double> grad) {
  LikelihoodModel model(std::vector<SubjectRecord>(data.begin(), data.end()));
  return model.value_and_grad(layout, u, grad);
}

LikelihoodModel::LikelihoodModel(std::vector<SubjectRecord> data)
    : data_(std::move(data)) {
  if (data_.empty()) throw ConfigError("dataset is empty");
  p_ = static_cast<int>(data_[0].x.size());
  prep_.reserve(data_.size());
  x_.reserve(data_.size() * static_cast<std::size_t>(p_));
  for (const SubjectRecord& s : data_) {
    validate(s);
    if (static_cast<int>(s.x.size()) != p_)
      throw ConfigError("subject '" + s.id + "': covariate count differs");
    Prepared pr;
    pr.z = s.z;
    pr.dr = s.delta_r;
    pr.dt = s.delta_t;
    pr.y_r = s.y_r;
    pr.log_y_r = std::log(s.y_r);
    pr.sojourn = s.y_t - s.y_r;
    pr.log_sojourn = pr.sojourn > 0.0 ? std::log(pr.sojourn) : kNegInf;
    pr.x_offset = x_.size();
    x_.insert(x_.end(), s.x.begin(), s.x.end());
    prep_.push_back(pr);
  }
}

double LikelihoodModel::total_marginal_loglik(const ModelParams& params) const {
  const ParamLayout layout{p_};
  const std::vector<double> u = layout.unconstrain(params);
  std::vector<double> scratch(layout.dim());
  double total = 0.0;
  for (const Prepared& s : prep_)
    total += subject_value_and_grad(s, layout, u, scratch, /*want_grad=*/false);
  return total;
}

double LikelihoodModel::value_and_grad(const ParamLayout& layout,
                                       std::span<const double> u,
                                       std::span<double> grad) const {
  if (layout.p != p_ || static_cast<int>(u.size()) != layout.dim() ||
      grad.size() != u.size())
    throw std::invalid_argument("value_and_grad: dimension mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  // Fixed subject order keeps the floating-point sum reproducible.
  for (const Prepared& s : prep_)
    total += subject_value_and_grad(s, layout, u, grad, /*want_grad=*/true);
  return total;
}

double LikelihoodModel::subject_value_and_grad(const Prepared& s,
                                               const ParamLayout& layout,
                                               std::span<const double> u,
                                               std::span<double> grad,
                                               bool want_grad) const {
  const double* x = x_.data() + s.x_offset;
  const double log_v = u[layout.log_frailty_var()];
  const double v = std::exp(log_v);
  const double d = static_cast<double>(s.dr + s.dt);

  // Per-transition pieces at reference frailty: cumulative hazards and the
  // log event-time base (study time for 1-2, sojourn time for 3).
  double log_rate[4], log_shape[4], shape[4], xb[4], cum[4], log_base[4];
  for (int j = 1; j <= 3; ++j) {
    log_rate[j] = u[layout.log_rate(s.z, j)];
    log_shape[j] = u[layout.log_shape(s.z, j)];
    shape[j] = std::exp(log_shape[j]);
    double acc = 0.0;
    const int base = layout.coef(s.z, j, 0);
    for (int k = 0; k < p_; ++k) acc += x[k] * u[base + k];
    xb[j] = acc;
  }
  log_base[1] = log_base[2] = s.log_y_r;
  log_base[3] = s.log_sojourn;
  cum[1] = std::exp(log_rate[1] + xb[1] + shape[1] * s.log_y_r);
  cum[2] = std::exp(log_rate[2] + xb[2] + shape[2] * s.log_y_r);
  cum[3] = (s.dr && s.sojourn > 0.0)
               ? std::exp(log_rate[3] + xb[3] + shape[3] * s.log_sojourn)
               : 0.0;

  const double cum_sum = cum[1] + cum[2] + cum[3];
  const double vh = v * cum_sum;
  const double lp = std::log1p(vh);
  if (!std::isfinite(lp) || !std::isfinite(cum_sum)) return kNegInf;

  double ll = -(cum_sum * log1p_ratio(vh) + d * lp);
  if (s.dr && s.dt) ll += std::log1p(v);
  if (s.dr)
    ll += log_rate[1] + log_shape[1] + (shape[1] - 1.0) * s.log_y_r + xb[1];
  if (s.dt && !s.dr)
    ll += log_rate[2] + log_shape[2] + (shape[2] - 1.0) * s.log_y_r + xb[2];
  if (s.dr && s.dt)
    ll += log_rate[3] + log_shape[3] + (shape[3] - 1.0) * s.log_sojourn + xb[3];

  if (!want_grad) return ll;

  // d(-c * log(1 + v*cum_sum))/d(log-scale parameter of transition j)
  // = -c * v/(1+vh) * dcum_j, with c = 1/v + d. Event terms add the
  // pattern indicators.
  const double denom = 1.0 + vh;
  const double g_common = (1.0 + d * v) / denom;  // c*v/(1+vh) with c=1/v+d
  const double ev[4] = {0.0, static_cast<double>(s.dr),
                        static_cast<double>(s.dt * (1 - s.dr)),
                        static_cast<double>(s.dr * s.dt)};
  for (int j = 1; j <= 3; ++j) {
    const double m = ev[j] - g_common * cum[j];
    grad[layout.log_rate(s.z, j)] += m;
    if (cum[j] > 0.0 || ev[j] > 0.0)
      grad[layout.log_shape(s.z, j)] += ev[j] + m * shape[j] * log_base[j];
    const int base = layout.coef(s.z, j, 0);
    for (int k = 0; k < p_; ++k) grad[base + k] += m * x[k];
  }

  // d/d(log v): dd * v/(1+v) + (1/v) log1p(vh) - (1 + d v) cum_sum/(1+vh)
  double g_v = cum_sum * log1p_ratio(vh) - (1.0 + d * v) * cum_sum / denom;
  if (s.dr && s.dt) g_v += v / (1.0 + v);
  grad[layout.log_frailty_var()] += g_v;

  return ll;
}

}  // namespace screff
