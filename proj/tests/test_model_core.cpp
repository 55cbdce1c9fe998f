#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "screff/hazards.hpp"
#include "screff/types.hpp"

using namespace screff;

namespace {

SubjectRecord base_record() {
  SubjectRecord s;
  s.id = "s1";
  s.z = 0;
  s.y_r = 1.0;
  s.delta_r = 0;
  s.y_t = 1.0;
  s.delta_t = 0;
  return s;
}

ModelParams unit_params(int p = 0) {
  ModelParams params;
  for (auto& tr : params.transitions) {
    tr.shape = 1.0;
    tr.rate = 1.0;
    tr.coef.assign(p, 0.0);
  }
  params.frailty_var = 1.0;
  return params;
}

}  // namespace

TEST_CASE("subject record validation accepts every legal pattern") {
  SubjectRecord s = base_record();
  CHECK_NOTHROW(validate(s));  // censored before anything

  s.delta_t = 1;  // death without the nonterminal event
  CHECK_NOTHROW(validate(s));

  s.delta_t = 0;  // nonterminal then censored
  s.delta_r = 1;
  s.y_r = 0.4;
  CHECK_NOTHROW(validate(s));

  s.delta_t = 1;  // nonterminal then death
  CHECK_NOTHROW(validate(s));
}

TEST_CASE("subject record validation rejects inconsistent rows") {
  {
    SubjectRecord s = base_record();
    s.y_r = 2.0;  // y_r > y_t
    s.delta_r = 1;
    CHECK_THROWS_AS(validate(s), ConfigError);
  }
  {
    SubjectRecord s = base_record();
    s.y_r = 0.5;  // delta_r = 0 requires y_r == y_t
    CHECK_THROWS_AS(validate(s), ConfigError);
  }
  {
    SubjectRecord s = base_record();
    s.delta_r = 1;  // both events need y_r strictly < y_t
    s.delta_t = 1;
    CHECK_THROWS_AS(validate(s), ConfigError);
  }
  {
    SubjectRecord s = base_record();
    s.y_r = 0.0;  // nonpositive time
    s.y_t = 0.0;
    CHECK_THROWS_AS(validate(s), ConfigError);
  }
  {
    SubjectRecord s = base_record();
    s.z = 2;  // arm must be 0/1
    CHECK_THROWS_AS(validate(s), ConfigError);
  }
  {
    SubjectRecord s = base_record();
    s.delta_t = 7;  // flags must be 0/1
    CHECK_THROWS_AS(validate(s), ConfigError);
  }
}

TEST_CASE("transition hazard fixed-value examples") {
  ModelParams params = unit_params(1);
  params.at(0, 1).rate = 0.5;
  params.at(0, 1).shape = 2.0;
  const std::vector<double> x0{0.0};

  // rate * shape * t^(shape-1) = 0.5 * 2 * 2 = 2
  CHECK(transition_hazard(params, 0, 1, 2.0, 0.0, x0, 1.0) ==
        doctest::Approx(2.0).epsilon(1e-14));

  // covariate multiplies the hazard by exp(x'coef) = 2
  params.at(0, 1).coef[0] = std::log(2.0);
  const std::vector<double> x1{1.0};
  CHECK(transition_hazard(params, 0, 1, 2.0, 0.0, x1, 1.0) ==
        doctest::Approx(4.0).epsilon(1e-14));

  // transition 3 runs on the sojourn clock: exponential hazard is flat
  CHECK(transition_hazard(params, 1, 3, 5.75, 2.25, x0, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cumulative hazard fixed-value examples") {
  ModelParams params = unit_params(0);
  params.at(0, 1).rate = 0.5;
  params.at(0, 1).shape = 2.0;
  const std::vector<double> x{};

  // rate * t^shape = 0.5 * 4 = 2
  CHECK(transition_cum_hazard(params, 0, 1, 2.0, 0.0, x, 1.0) ==
        doctest::Approx(2.0).epsilon(1e-14));

  // zero elapsed sojourn time gives zero cumulative hazard
  CHECK(transition_cum_hazard(params, 0, 3, 1.5, 1.5, x, 1.0) == 0.0);

  // frailty enters multiplicatively
  const double base = transition_cum_hazard(params, 0, 1, 2.0, 0.0, x, 1.0);
  CHECK(transition_cum_hazard(params, 0, 1, 2.0, 0.0, x, 3.0) ==
        doctest::Approx(3.0 * base).epsilon(1e-14));
}

TEST_CASE("hazard scales exactly linearly in frailty and covariate effect") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const ModelParams params = oracle::random_params(gen, 2);
    std::uniform_real_distribution<double> xd(-1.0, 1.0);
    const std::vector<double> x{xd(gen), xd(gen)};
    const int z = rep % 2;
    const int j = 1 + rep % 3;
    const double s0 = (j == 3) ? 0.7 : 0.0;
    const double t = 2.5;
    const double h1 = transition_hazard(params, z, j, t, s0, x, 1.0);
    const double h2 = transition_hazard(params, z, j, t, s0, x, 2.0);
    CHECK(h2 / h1 == doctest::Approx(2.0).epsilon(1e-13));
    const double c1 = transition_cum_hazard(params, z, j, t, s0, x, 1.7);
    const double c2 = transition_cum_hazard(params, z, j, t, s0, x, 3.4);
    CHECK(c2 / c1 == doctest::Approx(2.0).epsilon(1e-13));
  }
}

TEST_CASE("cumulative hazard equals quadrature of the hazard") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> xd(-1.0, 1.0);
  for (int rep = 0; rep < 12; ++rep) {
    const ModelParams params = oracle::random_params(gen, 2);
    const std::vector<double> x{xd(gen), xd(gen)};
    const int z = rep % 2;
    const int j = 1 + rep % 3;
    const double s0 = (j == 3) ? 0.9 : 0.0;
    const double gamma = 0.5 + 0.2 * rep;
    const double t = s0 + 1.8;
    const double quad = oracle::adaptive_simpson(
        [&](double tt) {
          return transition_hazard(params, z, j, tt, s0, x, gamma);
        },
        s0 + 1e-12, t, 1e-13);
    const double closed = transition_cum_hazard(params, z, j, t, s0, x, gamma);
    CHECK(quad == doctest::Approx(closed).epsilon(1e-8));
  }
}

TEST_CASE("weibull_event_scale matches the cumulative hazard") {
  std::mt19937_64 gen(29);
  for (int rep = 0; rep < 10; ++rep) {
    const ModelParams params = oracle::random_params(gen, 1);
    const TransitionModel& tr = params.at(rep % 2, 1 + rep % 3);
    const double xb = 0.3 * (rep - 5);
    const double gamma = 0.4 + 0.15 * rep;
    const double scale = weibull_event_scale(tr, gamma, xb);
    const double u = 1.3;
    const double expected = gamma * tr.rate * std::pow(u, tr.shape) *
                            std::exp(xb);
    CHECK(std::pow(u / scale, tr.shape) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  // zero rate: the event never fires
  TransitionModel dead;
  dead.rate = 0.0;
  dead.shape = 1.0;
  CHECK(std::isinf(weibull_event_scale(dead, 1.0, 0.0)));
}

TEST_CASE("principal state classification at a fixed time") {
  PotentialOutcomeSet po;
  po.t0 = 10.0;
  po.t1 = 10.0;
  CHECK(principal_state(po, 5.0) == PrincipalState::AlwaysAlive);
  po.t1 = 3.0;  // dead under treatment only
  CHECK(principal_state(po, 5.0) == PrincipalState::TreatmentKilled);
  po.t0 = 2.0;
  po.t1 = 10.0;  // dead under control only
  CHECK(principal_state(po, 5.0) == PrincipalState::ControlKilled);
  po.t1 = 4.0;  // dead under both
  CHECK(principal_state(po, 5.0) == PrincipalState::DoomedDead);
  // survival is strict: t equal to the death time means dead at t
  po.t0 = 5.0;
  po.t1 = 5.0;
  CHECK(principal_state(po, 5.0) == PrincipalState::DoomedDead);
}

TEST_CASE("always-alive cohorts are nested over time") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> td(0.1, 10.0);
  for (int rep = 0; rep < 200; ++rep) {
    PotentialOutcomeSet po;
    po.t0 = td(gen);
    po.t1 = td(gen);
    double prev_t = 0.0;
    bool was_alive = true;
    for (double t : {1.0, 2.0, 4.0, 8.0}) {
      const bool alive = principal_state(po, t) == PrincipalState::AlwaysAlive;
      if (!was_alive) CHECK(!alive);  // once left, never re-enters
      was_alive = alive;
      prev_t = t;
    }
    (void)prev_t;
  }
}

TEST_CASE("parameter layout round trips through constrain/unconstrain") {
  std::mt19937_64 gen(41);
  for (int p : {0, 1, 3}) {
    const ParamLayout layout{p};
    CHECK(layout.dim() == 13 + 6 * p);
    const ModelParams params = oracle::random_params(gen, p);
    const std::vector<double> u = layout.unconstrain(params);
    REQUIRE(static_cast<int>(u.size()) == layout.dim());
    const ModelParams back = layout.constrain(u);
    for (int z : {0, 1}) {
      for (int j : {1, 2, 3}) {
        CHECK(back.at(z, j).rate ==
              doctest::Approx(params.at(z, j).rate).epsilon(1e-14));
        CHECK(back.at(z, j).shape ==
              doctest::Approx(params.at(z, j).shape).epsilon(1e-14));
        for (int k = 0; k < p; ++k) {
          CHECK(back.at(z, j).coef[k] == params.at(z, j).coef[k]);
        }
      }
    }
    CHECK(back.frailty_var ==
          doctest::Approx(params.frailty_var).epsilon(1e-14));

    // index map is a bijection onto 0..dim-1
    std::vector<int> seen(layout.dim(), 0);
    for (int z : {0, 1}) {
      for (int j : {1, 2, 3}) {
        ++seen[layout.log_rate(z, j)];
        ++seen[layout.log_shape(z, j)];
        for (int k = 0; k < p; ++k) ++seen[layout.coef(z, j, k)];
      }
    }
    ++seen[layout.log_frailty_var()];
    for (int c : seen) CHECK(c == 1);
  }
}

TEST_CASE("parameter names are positional and readable") {
  const ParamLayout layout{2};
  const std::vector<std::string> cov{"age", "sex"};
  const std::vector<std::string> names = layout.parameter_names(cov);
  REQUIRE(static_cast<int>(names.size()) == layout.dim());
  CHECK(names[layout.log_rate(0, 1)] == "rate_z0_t1");
  CHECK(names[layout.log_shape(1, 3)] == "shape_z1_t3");
  CHECK(names[layout.coef(0, 2, 1)] == "coef_z0_t2_sex");
  CHECK(names[layout.coef(1, 1, 0)] == "coef_z1_t1_age");
  CHECK(names[layout.log_frailty_var()] == "frailty_var");
}

TEST_CASE("model parameter validation") {
  ModelParams ok = unit_params(1);
  CHECK_NOTHROW(validate(ok));

  ModelParams bad = ok;
  bad.at(0, 2).shape = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  bad = ok;
  bad.at(1, 1).rate = -0.1;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  bad = ok;
  bad.frailty_var = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  bad = ok;
  bad.at(1, 3).coef.push_back(0.5);  // ragged coefficient lengths
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("event pattern mapping") {
  CHECK(event_pattern(0, 0) == EventPattern::Neither);
  CHECK(event_pattern(1, 0) == EventPattern::NonterminalOnly);
  CHECK(event_pattern(0, 1) == EventPattern::TerminalOnly);
  CHECK(event_pattern(1, 1) == EventPattern::Both);
}
