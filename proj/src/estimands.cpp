#include "screff/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "screff/frailty.hpp"
#include "screff/numeric.hpp"
#include "screff/parallel.hpp"
#include "screff/rng.hpp"

namespace screff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Cohort-level effect sums at cutoff r, iterating the always-alive index
// list in subject order. tv_sace_draw/rm_sace_draw and the grid evaluation
// both run through here, so the two routes agree bitwise.
struct CellAccum {
  double tv = 0.0, rm = 0.0;
};

CellAccum cell_sums(std::span<const PotentialOutcomeSet> po,
                    std::span<const int> cohort, double r) {
  CellAccum acc;
  for (int i : cohort) {
    const PotentialOutcomeSet& s = po[i];
    const double inc1 = (s.r1 && *s.r1 < r) ? 1.0 : 0.0;
    const double inc0 = (s.r0 && *s.r0 < r) ? 1.0 : 0.0;
    acc.tv += inc1 - inc0;
    const double free1 = s.r1 ? std::min(*s.r1, r) : r;
    const double free0 = s.r0 ? std::min(*s.r0, r) : r;
    acc.rm += free1 - free0;
  }
  return acc;
}

std::vector<int> always_alive_cohort(std::span<const PotentialOutcomeSet> po,
                                     double t) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < po.size(); ++i)
    if (po[i].t0 > t && po[i].t1 > t) idx.push_back(static_cast<int>(i));
  return idx;
}

void check_cell_args(double r, double t) {
  if (!(r > 0.0) || !(t > 0.0))
    throw std::invalid_argument("effect cell times must be positive");
  if (r > t)
    throw std::invalid_argument("effect cell requires r <= t");
}

CellSummary summarize_cell(double r, double t, std::vector<double>& values) {
  CellSummary cell;
  cell.r = r;
  cell.t = t;
  cell.n_draws_defined = static_cast<int>(values.size());
  if (values.empty()) {
    cell.mean = cell.median = cell.lo95 = cell.hi95 = kNaN;
    return cell;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  cell.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  cell.median = quantile_sorted(values, 0.5);
  cell.lo95 = quantile_sorted(values, 0.025);
  cell.hi95 = quantile_sorted(values, 0.975);
  return cell;
}

}  // namespace

void validate(const TimeGrid& grid) {
  if (grid.times.empty()) throw ConfigError("time grid is empty");
  double prev = 0.0;
  for (double t : grid.times) {
    if (!(t > prev) || !std::isfinite(t))
      throw ConfigError("time grid must be strictly increasing and positive");
    prev = t;
  }
}

TimeGrid default_time_grid(std::span<const SubjectRecord> data) {
  if (data.empty()) throw ConfigError("default_time_grid: empty dataset");
  double max_yr = 0.0;
  std::vector<double> yr;
  yr.reserve(data.size());
  for (const SubjectRecord& s : data) {
    max_yr = std::max(max_yr, s.y_r);
    yr.push_back(s.y_r);
  }
  TimeGrid grid;
  if (max_yr <= 365.0) {
    const int k = std::min(90, static_cast<int>(std::floor(max_yr)));
    if (k >= 1) {
      for (int i = 1; i <= k; ++i) grid.times.push_back(i);
      return grid;
    }
    // Sub-unit time scale: fall through to the quantile rule.
  }
  std::sort(yr.begin(), yr.end());
  for (int i = 1; i <= 50; ++i) {
    const double q = quantile_sorted(yr, i / 50.0);
    if (grid.times.empty() || q > grid.times.back()) grid.times.push_back(q);
  }
  validate(grid);
  return grid;
}

void validate_grid_against_data(const TimeGrid& grid,
                                std::span<const SubjectRecord> data) {
  validate(grid);
  double max_yr = 0.0;
  for (const SubjectRecord& s : data) max_yr = std::max(max_yr, s.y_r);
  if (grid.times.back() > max_yr)
    throw ConfigError(
        "time grid extends beyond the largest observed nonterminal/censoring "
        "time; effects there would be pure extrapolation");
}

std::optional<double> tv_sace_draw(std::span<const PotentialOutcomeSet> po,
                                   double r, double t) {
  check_cell_args(r, t);
  const std::vector<int> cohort = always_alive_cohort(po, t);
  if (cohort.empty()) return std::nullopt;
  return cell_sums(po, cohort, r).tv / static_cast<double>(cohort.size());
}

std::optional<double> rm_sace_draw(std::span<const PotentialOutcomeSet> po,
                                   double r, double t) {
  check_cell_args(r, t);
  const std::vector<int> cohort = always_alive_cohort(po, t);
  if (cohort.empty()) return std::nullopt;
  return cell_sums(po, cohort, r).rm / static_cast<double>(cohort.size());
}

std::array<double, 4> state_fractions(std::span<const PotentialOutcomeSet> po,
                                      double t) {
  if (po.empty()) throw std::invalid_argument("state_fractions: no outcomes");
  std::array<int, 4> counts{0, 0, 0, 0};
  for (const PotentialOutcomeSet& s : po)
    ++counts[static_cast<int>(principal_state(s, t))];
  std::array<double, 4> frac;
  for (int k = 0; k < 4; ++k)
    frac[k] = static_cast<double>(counts[k]) / static_cast<double>(po.size());
  return frac;
}

DrawEstimates compute_draw_estimates(std::span<const PotentialOutcomeSet> po,
                                     const TimeGrid& grid) {
  validate(grid);
  const int n_times = static_cast<int>(grid.times.size());
  const int n_cells = n_times * (n_times + 1) / 2;
  DrawEstimates est;
  est.tv.assign(n_cells, kNaN);
  est.rm.assign(n_cells, kNaN);
  est.state_mix.resize(static_cast<std::size_t>(n_times) * 4);

  for (int ti = 0; ti < n_times; ++ti) {
    const double t = grid.times[ti];
    const std::array<double, 4> mix = state_fractions(po, t);
    for (int k = 0; k < 4; ++k)
      est.state_mix[static_cast<std::size_t>(ti) * 4 + k] = mix[k];

    const std::vector<int> cohort = always_alive_cohort(po, t);
    if (cohort.empty()) continue;
    const double m = static_cast<double>(cohort.size());
    for (int ri = 0; ri <= ti; ++ri) {
      const CellAccum acc = cell_sums(po, cohort, grid.times[ri]);
      const int cell = ti * (ti + 1) / 2 + ri;
      est.tv[cell] = acc.tv / m;
      est.rm[cell] = acc.rm / m;
    }
  }
  return est;
}

EstimandGrid summarize_grid(
    std::span<const std::vector<PotentialOutcomeSet>> outcomes_per_draw,
    const TimeGrid& grid, int n_threads) {
  validate(grid);
  if (outcomes_per_draw.empty())
    throw std::invalid_argument("summarize_grid: no draws");
  const int n_draws = static_cast<int>(outcomes_per_draw.size());
  const int n_times = static_cast<int>(grid.times.size());
  const int n_cells = n_times * (n_times + 1) / 2;

  std::vector<DrawEstimates> per_draw(n_draws);
  parallel_for(
      n_draws,
      [&](int b) {
        per_draw[b] = compute_draw_estimates(outcomes_per_draw[b], grid);
      },
      n_threads);

  EstimandGrid out;
  out.grid = grid;
  out.tv_sace.reserve(n_cells);
  out.rm_sace.reserve(n_cells);

  std::vector<double> vals;
  vals.reserve(n_draws);
  for (int ti = 0; ti < n_times; ++ti) {
    for (int ri = 0; ri <= ti; ++ri) {
      const int cell = ti * (ti + 1) / 2 + ri;
      vals.clear();
      for (int b = 0; b < n_draws; ++b)
        if (!std::isnan(per_draw[b].tv[cell]))
          vals.push_back(per_draw[b].tv[cell]);
      out.tv_sace.push_back(
          summarize_cell(grid.times[ri], grid.times[ti], vals));
      vals.clear();
      for (int b = 0; b < n_draws; ++b)
        if (!std::isnan(per_draw[b].rm[cell]))
          vals.push_back(per_draw[b].rm[cell]);
      out.rm_sace.push_back(
          summarize_cell(grid.times[ri], grid.times[ti], vals));
    }
  }

  for (int ti = 0; ti < n_times; ++ti) {
    StateSummary st;
    st.t = grid.times[ti];
    for (int k = 0; k < 4; ++k) {
      vals.clear();
      for (int b = 0; b < n_draws; ++b)
        vals.push_back(per_draw[b].state_mix[static_cast<std::size_t>(ti) * 4 + k]);
      double sum = 0.0;
      for (double v : vals) sum += v;
      st.mean[k] = sum / static_cast<double>(vals.size());
      std::sort(vals.begin(), vals.end());
      st.lo95[k] = quantile_sorted(vals, 0.025);
      st.hi95[k] = quantile_sorted(vals, 0.975);
    }
    out.states.push_back(st);
  }
  return out;
}

std::vector<ProfileRow> profile_prediction(
    std::span<const double> x_new, FrailtyLevel level,
    const PosteriorDraws& draws, const ParamLayout& layout,
    const TimeGrid& grid, int reps_per_draw, std::uint64_t seed,
    int n_threads) {
  validate(grid);
  if (reps_per_draw < 1)
    throw std::invalid_argument("profile_prediction: reps_per_draw >= 1");
  if (static_cast<int>(x_new.size()) != layout.p)
    throw std::invalid_argument("profile_prediction: covariate length");
  const int n_draws = draws.total_rows();
  const int n_times = static_cast<int>(grid.times.size());
  const std::uint64_t prof_seed = stage_seed(seed, "profile");
  const std::uint64_t level_key = static_cast<std::uint64_t>(level) + 1;

  // Per-draw accumulators, reduced deterministically afterwards.
  struct DrawRow {
    std::vector<double> state;  // [n_times * 4]
    std::vector<double> tv, rm;
    std::vector<std::uint8_t> has_cohort;
  };
  std::vector<DrawRow> rows(n_draws);

  parallel_for(
      n_draws,
      [&](int b) {
        const ModelParams params = layout.constrain(draws.row(b));
        double gamma = 1.0;
        if (level != FrailtyLevel::Average) {
          const double inv_v = 1.0 / params.frailty_var;
          gamma = gamma_quantile(inv_v, inv_v,
                                 level == FrailtyLevel::P10 ? 0.1 : 0.9);
        }
        RngStream rng(prof_seed, level_key, static_cast<std::uint64_t>(b));
        std::vector<PotentialOutcomeSet> po(reps_per_draw);
        for (int rep = 0; rep < reps_per_draw; ++rep) {
          const ArmOutcome a0 = draw_arm_outcome(x_new, gamma, 0, params, rng);
          const ArmOutcome a1 = draw_arm_outcome(x_new, gamma, 1, params, rng);
          po[rep] = PotentialOutcomeSet{a0.r, a1.r, a0.t, a1.t};
        }
        DrawRow& row = rows[b];
        row.state.resize(static_cast<std::size_t>(n_times) * 4);
        row.tv.assign(n_times, 0.0);
        row.rm.assign(n_times, 0.0);
        row.has_cohort.assign(n_times, 0);
        for (int ti = 0; ti < n_times; ++ti) {
          const double t = grid.times[ti];
          const std::array<double, 4> mix = state_fractions(po, t);
          for (int k = 0; k < 4; ++k)
            row.state[static_cast<std::size_t>(ti) * 4 + k] = mix[k];
          const auto tv = tv_sace_draw(po, t, t);
          if (tv) {
            row.has_cohort[ti] = 1;
            row.tv[ti] = *tv;
            row.rm[ti] = *rm_sace_draw(po, t, t);
          }
        }
      },
      n_threads);

  std::vector<ProfileRow> out(n_times);
  for (int ti = 0; ti < n_times; ++ti) {
    ProfileRow& pr = out[ti];
    pr.t = grid.times[ti];
    for (int b = 0; b < n_draws; ++b) {
      for (int k = 0; k < 4; ++k)
        pr.state_prob[k] += rows[b].state[static_cast<std::size_t>(ti) * 4 + k];
      if (rows[b].has_cohort[ti]) {
        ++pr.n_draws_with_cohort;
        pr.tv += rows[b].tv[ti];
        pr.rm += rows[b].rm[ti];
      }
    }
    for (int k = 0; k < 4; ++k)
      pr.state_prob[k] /= static_cast<double>(n_draws);
    if (pr.n_draws_with_cohort > 0) {
      pr.tv /= pr.n_draws_with_cohort;
      pr.rm /= pr.n_draws_with_cohort;
    } else {
      pr.tv = pr.rm = kNaN;
    }
  }
  return out;
}

}  // namespace screff
