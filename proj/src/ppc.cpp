#include "screff/ppc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "screff/frailty.hpp"
#include "screff/numeric.hpp"
#include "screff/parallel.hpp"

namespace screff {

std::vector<double> replicate_censor_times(std::span<const SubjectRecord> data,
                                           double horizon) {
  double h = horizon;
  if (h <= 0.0) {
    h = 0.0;
    for (const auto& s : data) h = std::max(h, s.y_t);
  }
  std::vector<double> c(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    // Censored subjects carry their own follow-up end; deaths have no
    // observable censoring time, so the administrative horizon stands in
    // (never below the death time itself, which would invalidate the draw).
    c[i] = data[i].delta_t == 0 ? data[i].y_t : std::max(h, data[i].y_t);
  }
  return c;
}

namespace {

SubjectRecord censor_to_record(const SubjectRecord& base, const ArmOutcome& o,
                               double c) {
  SubjectRecord r = base;
  r.delta_t = o.t <= c ? 1 : 0;
  r.y_t = std::min(o.t, c);
  r.delta_r = (o.r.has_value() && *o.r <= c) ? 1 : 0;
  r.y_r = r.delta_r ? *o.r : r.y_t;
  return r;
}

}  // namespace

ReplicateData generate_replicate(std::span<const SubjectRecord> data,
                                 const ModelParams& params,
                                 std::span<const double> censor_times,
                                 RngStream& rng) {
  if (censor_times.size() != data.size())
    throw std::invalid_argument("generate_replicate: censor_times size");
  ReplicateData rep;
  rep.records.reserve(data.size());
  rep.outcomes.reserve(data.size());
  rep.frailty.reserve(data.size());
  const double inv_v = 1.0 / params.frailty_var;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const SubjectRecord& s = data[i];
    const double gamma = rng.gamma(inv_v, inv_v);
    const ArmOutcome a0 = draw_arm_outcome(s.x, gamma, 0, params, rng);
    const ArmOutcome a1 = draw_arm_outcome(s.x, gamma, 1, params, rng);
    const ArmOutcome& factual = s.z == 1 ? a1 : a0;
    rep.records.push_back(censor_to_record(s, factual, censor_times[i]));
    rep.outcomes.push_back({a0.r, a1.r, a0.t, a1.t});
    rep.frailty.push_back(gamma);
  }
  return rep;
}

std::vector<double> km_estimate(std::span<const double> times,
                                std::span<const int> events,
                                std::span<const double> eval_times) {
  if (times.empty()) throw std::invalid_argument("km_estimate: empty input");
  if (times.size() != events.size())
    throw std::invalid_argument("km_estimate: times/events size mismatch");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0))
      throw std::invalid_argument("km_estimate: negative time");
    if (events[i] != 0 && events[i] != 1)
      throw std::invalid_argument("km_estimate: event flag not 0/1");
  }
  const std::size_t n = times.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return times[a] < times[b];
  });

  // Distinct event times with death counts and the at-risk count just
  // before each: risk set shrinks by everyone (events or censorings) with
  // a smaller time.
  std::vector<double> ev_time;
  std::vector<double> factor;  // 1 - d/r at each distinct event time
  std::size_t pos = 0;
  std::size_t at_risk = n;
  while (pos < n) {
    const double t = times[order[pos]];
    std::size_t deaths = 0;
    std::size_t tied = 0;
    while (pos + tied < n && times[order[pos + tied]] == t) {
      deaths += events[order[pos + tied]] != 0;
      ++tied;
    }
    if (deaths > 0) {
      ev_time.push_back(t);
      factor.push_back(1.0 - static_cast<double>(deaths) /
                                 static_cast<double>(at_risk));
    }
    at_risk -= tied;
    pos += tied;
  }

  // Prefix products give S(t-) style evaluation: include event times
  // strictly below each evaluation point.
  std::vector<double> surv(eval_times.size(), 1.0);
  for (std::size_t k = 0; k < eval_times.size(); ++k) {
    double s = 1.0;
    for (std::size_t j = 0; j < ev_time.size() && ev_time[j] < eval_times[k];
         ++j)
      s *= factor[j];
    surv[k] = s;
  }
  return surv;
}

std::array<std::vector<double>, 2> km_by_arm(
    std::span<const SubjectRecord> data, const TimeGrid& grid) {
  std::array<std::vector<double>, 2> out;
  for (int z = 0; z < 2; ++z) {
    std::vector<double> t;
    std::vector<int> d;
    for (const auto& s : data) {
      if (s.z != z) continue;
      t.push_back(s.y_t);
      d.push_back(s.delta_t);
    }
    out[z] = km_estimate(t, d, grid.times);
  }
  return out;
}

namespace {

double always_alive_fraction(std::span<const PotentialOutcomeSet> po,
                             double t) {
  std::size_t count = 0;
  for (const auto& o : po) count += (o.t0 > t && o.t1 > t);
  return po.empty() ? 0.0
                    : static_cast<double>(count) /
                          static_cast<double>(po.size());
}

}  // namespace

std::vector<int> discrepancy_aa(std::span<const PotentialOutcomeSet> observed,
                                std::span<const PotentialOutcomeSet> replicate,
                                const TimeGrid& grid) {
  std::vector<int> ind(grid.times.size());
  for (std::size_t k = 0; k < grid.times.size(); ++k) {
    const double t = grid.times[k];
    ind[k] = always_alive_fraction(observed, t) >
                     always_alive_fraction(replicate, t)
                 ? 1
                 : 0;
  }
  return ind;
}

std::array<std::vector<int>, 2> discrepancy_km(
    const std::array<std::vector<double>, 2>& km_observed,
    std::span<const SubjectRecord> replicate, const TimeGrid& grid) {
  const auto km_rep = km_by_arm(replicate, grid);
  std::array<std::vector<int>, 2> ind;
  for (int z = 0; z < 2; ++z) {
    ind[z].resize(grid.times.size());
    for (std::size_t k = 0; k < grid.times.size(); ++k)
      ind[z][k] = km_observed[z][k] > km_rep[z][k] ? 1 : 0;
  }
  return ind;
}

int discrepancy_ks(std::span<const double> observed_frailty,
                   std::span<const double> replicate_frailty,
                   double frailty_var) {
  const double shape = 1.0 / frailty_var;
  auto prior_cdf = [shape](double x) { return gamma_cdf(shape, shape, x); };
  auto ks_against_prior = [&](std::span<const double> sample) {
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    return ks_statistic(sorted, prior_cdf);
  };
  return ks_against_prior(observed_frailty) >
                 ks_against_prior(replicate_frailty)
             ? 1
             : 0;
}

PpcReport run_ppc(std::span<const SubjectRecord> data,
                  const PosteriorDraws& draws, const ParamLayout& layout,
                  const TimeGrid& grid, std::uint64_t seed,
                  const PpcConfig& cfg) {
  validate(grid);
  if (draws.total_rows() == 0)
    throw std::invalid_argument("run_ppc: no posterior draws");
  const int total = draws.total_rows();
  int use = cfg.max_draws > 0 ? std::min(cfg.max_draws, total) : total;

  // Evenly spaced draw indices keep the subset spread across all chains.
  std::vector<int> idx(use);
  for (int k = 0; k < use; ++k)
    idx[k] = static_cast<int>(
        (static_cast<long long>(k) * total) / static_cast<long long>(use));

  const auto censor_times = replicate_censor_times(data, cfg.horizon);
  const auto km_obs = km_by_arm(data, grid);
  const std::uint64_t impute_seed = stage_seed(seed, "impute");
  const std::uint64_t rep_seed = stage_seed(seed, "ppc-replicate");

  const std::size_t k_times = grid.times.size();
  std::vector<std::vector<int>> aa(use);
  std::vector<std::array<std::vector<int>, 2>> km(use);
  std::vector<int> ks(use, 0);

  parallel_for(
      use,
      [&](int slot) {
        const int b = idx[slot];
        const ModelParams params = layout.constrain(draws.row(b));

        // Observed-side completion: same streams the estimation stage
        // uses for draw b, so both passes see identical imputations.
        const DrawImputation obs = impute_one_draw(data, params, impute_seed, b);

        RngStream rep_rng(rep_seed, static_cast<std::uint64_t>(b));
        const ReplicateData rep =
            generate_replicate(data, params, censor_times, rep_rng);

        aa[slot] = discrepancy_aa(obs.outcomes, rep.outcomes, grid);
        km[slot] = discrepancy_km(km_obs, rep.records, grid);
        ks[slot] = discrepancy_ks(obs.frailty, rep.frailty,
                                  params.frailty_var);
      },
      cfg.n_threads);

  PpcReport report;
  report.grid = grid;
  report.n_draws = use;
  report.pppv_aa.assign(k_times, 0.0);
  report.pppv_km[0].assign(k_times, 0.0);
  report.pppv_km[1].assign(k_times, 0.0);
  double ks_sum = 0.0;
  for (int s = 0; s < use; ++s) {
    for (std::size_t k = 0; k < k_times; ++k) {
      report.pppv_aa[k] += aa[s][k];
      report.pppv_km[0][k] += km[s][0][k];
      report.pppv_km[1][k] += km[s][1][k];
    }
    ks_sum += ks[s];
  }
  for (std::size_t k = 0; k < k_times; ++k) {
    report.pppv_aa[k] /= use;
    report.pppv_km[0][k] /= use;
    report.pppv_km[1][k] /= use;
  }
  report.pppv_ks = 1.0 - ks_sum / use;
  return report;
}

}  // namespace screff
