#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "screff/sampler.hpp"
#include "screff/types.hpp"

namespace screff {

/// Strictly increasing positive evaluation times.
struct TimeGrid {
  std::vector<double> times;
};

void validate(const TimeGrid& grid);

/// Default grid: unit-spaced 1..min(90, floor(max y_r)) when event times
/// look like days (max y_r <= 365), otherwise 50 equally spaced quantiles
/// of the observed y_r. Never exceeds the largest observed y_r.
TimeGrid default_time_grid(std::span<const SubjectRecord> data);

/// Throws ConfigError unless the grid is valid and bounded by max y_r.
void validate_grid_against_data(const TimeGrid& grid,
                                std::span<const SubjectRecord> data);

/// Difference in nonterminal-event incidence by time r among subjects alive
/// under both arms at time t (their terminal times exceed t):
///   mean over that cohort of 1(r1 < r) - 1(r0 < r),
/// where an absent nonterminal time never counts as occurred. Empty cohort
/// gives nullopt. Requires r <= t.
std::optional<double> tv_sace_draw(std::span<const PotentialOutcomeSet> po,
                                   double r, double t);

/// Difference in expected nonterminal-event-free time up to r in the same
/// cohort: mean of min(r1, r) - min(r0, r), with an absent nonterminal time
/// contributing r. Empty cohort gives nullopt. Requires r <= t.
std::optional<double> rm_sace_draw(std::span<const PotentialOutcomeSet> po,
                                   double r, double t);

/// Fraction of subjects in each principal state at time t, ordered
/// AlwaysAlive, TreatmentKilled, ControlKilled, DoomedDead.
std::array<double, 4> state_fractions(std::span<const PotentialOutcomeSet> po,
                                      double t);

/// Posterior summary of one (r, t) cell.
struct CellSummary {
  double r = 0.0, t = 0.0;
  double mean = 0.0, median = 0.0, lo95 = 0.0, hi95 = 0.0;
  int n_draws_defined = 0;  ///< draws with a nonempty always-alive cohort
};

/// Posterior summary of the state mix at one time.
struct StateSummary {
  double t = 0.0;
  std::array<double, 4> mean{}, lo95{}, hi95{};
};

/// Full posterior summaries over all r <= t grid pairs.
struct EstimandGrid {
  TimeGrid grid;
  std::vector<CellSummary> tv_sace, rm_sace;  ///< cell-major: t index, then r
  std::vector<StateSummary> states;
};

/// Per-draw effects and state mixes over the grid; cell (ri, ti) with
/// ri <= ti lives at index ti*(ti+1)/2 + ri. Values are NaN for draws whose
/// always-alive cohort at t is empty.
struct DrawEstimates {
  std::vector<double> tv, rm;     ///< [n_cells]
  std::vector<double> state_mix;  ///< [n_times * 4]
};

DrawEstimates compute_draw_estimates(std::span<const PotentialOutcomeSet> po,
                                     const TimeGrid& grid);

/// Summarizes imputed outcomes across posterior draws into an EstimandGrid
/// (means, medians, central 95% intervals, defined-draw counts).
EstimandGrid summarize_grid(
    std::span<const std::vector<PotentialOutcomeSet>> outcomes_per_draw,
    const TimeGrid& grid, int n_threads = 0);

/// Covariate-profile prediction at a fixed frailty level: P10/P90 use that
/// draw's Gamma(1/v, 1/v) quantile, Average uses frailty 1.
enum class FrailtyLevel { P10, Average, P90 };

struct ProfileRow {
  double t = 0.0;
  std::array<double, 4> state_prob{};  ///< posterior-mean state probabilities
  double tv = 0.0, rm = 0.0;  ///< conditional effects among the always-alive
  int n_draws_with_cohort = 0;
};

/// Simulates reps_per_draw outcome pairs per posterior draw for the given
/// covariate profile and summarizes states and conditional effects at each
/// grid time. Streams are keyed by (stage_seed(seed, "profile"), level,
/// draw).
std::vector<ProfileRow> profile_prediction(
    std::span<const double> x_new, FrailtyLevel level,
    const PosteriorDraws& draws, const ParamLayout& layout,
    const TimeGrid& grid, int reps_per_draw, std::uint64_t seed,
    int n_threads = 0);

}  // namespace screff
