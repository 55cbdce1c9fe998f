#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace screff {

/// Raised for invalid inputs, configuration, or data files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical routine cannot proceed (failed initialization,
/// non-finite results, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One subject's observed semicompeting-risks data.
///
/// y_r is the time of the nonterminal event when delta_r = 1, otherwise it
/// equals y_t (the first of death / censoring). y_t is the terminal-event
/// time when delta_t = 1, otherwise the censoring time.
struct SubjectRecord {
  std::string id;
  int z = 0;  ///< treatment arm, 0 or 1
  double y_r = 0.0;
  int delta_r = 0;
  double y_t = 0.0;
  int delta_t = 0;
  std::vector<double> x;  ///< covariates
};

/// Throws ConfigError unless the record satisfies the schema invariants:
/// positive finite times, y_r <= y_t, y_r == y_t when delta_r = 0, and
/// y_r < y_t strictly when both events are observed.
void validate(const SubjectRecord& s);

/// Weibull proportional-hazards specification for one transition.
struct TransitionModel {
  double shape = 1.0;       ///< Weibull shape
  double rate = 1.0;        ///< baseline rate scaling
  std::vector<double> coef; ///< log hazard ratios for the covariates
};

/// Natural-scale parameters of the two-arm illness-death model: six
/// transitions (arm x {onset, death-without-onset, death-after-onset})
/// plus the shared frailty variance.
struct ModelParams {
  std::array<TransitionModel, 6> transitions;
  double frailty_var = 1.0;

  /// Transition lookup: z in {0,1}, j in {1,2,3}.
  TransitionModel& at(int z, int j) { return transitions[index(z, j)]; }
  const TransitionModel& at(int z, int j) const {
    return transitions[index(z, j)];
  }
  static int index(int z, int j) { return z * 3 + (j - 1); }

  int n_covariates() const {
    return static_cast<int>(transitions[0].coef.size());
  }
};

/// Throws ConfigError unless shapes, rates, and the frailty variance are
/// strictly positive and every transition has the same coefficient length.
void validate(const ModelParams& p);

/// Bijective packing of ModelParams into an unconstrained real vector:
/// [log rates (6)] [log shapes (6)] [coefficients (6p)] [log frailty_var].
struct ParamLayout {
  int p = 0;  ///< number of covariates

  int dim() const { return 13 + 6 * p; }
  int log_rate(int z, int j) const { return ModelParams::index(z, j); }
  int log_shape(int z, int j) const { return 6 + ModelParams::index(z, j); }
  int coef(int z, int j, int k) const {
    return 12 + ModelParams::index(z, j) * p + k;
  }
  int log_frailty_var() const { return 12 + 6 * p; }

  ModelParams constrain(std::span<const double> u) const;
  std::vector<double> unconstrain(const ModelParams& params) const;

  /// Natural-scale column names in vector order, e.g. "rate_z0_t1",
  /// "shape_z1_t3", "coef_z0_t2_age", "frailty_var".
  std::vector<std::string> parameter_names(
      std::span<const std::string> covariate_names) const;
};

/// Outcomes of one arm: time of the nonterminal event (absent when death
/// comes first, in which case it never occurs) and the terminal time.
struct ArmOutcome {
  std::optional<double> r;
  double t = 0.0;
};

/// Joint potential outcomes of one subject under both arms.
struct PotentialOutcomeSet {
  std::optional<double> r0, r1;
  double t0 = 0.0, t1 = 0.0;
};

/// Principal-state classification by survival under each arm at time t.
enum class PrincipalState { AlwaysAlive, TreatmentKilled, ControlKilled, DoomedDead };

/// State at time t: AlwaysAlive if alive under both arms, TreatmentKilled if
/// alive only under control, ControlKilled if alive only under treatment,
/// DoomedDead otherwise. "Alive at t" means the terminal time exceeds t.
PrincipalState principal_state(const PotentialOutcomeSet& po, double t);

/// Observed-data event pattern used by the likelihood case analysis.
enum class EventPattern { Neither, NonterminalOnly, TerminalOnly, Both };

EventPattern event_pattern(int delta_r, int delta_t);

}  // namespace screff
