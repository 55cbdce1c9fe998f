#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "screff/frailty.hpp"
#include "screff/numeric.hpp"
#include "screff/ppc.hpp"
#include "screff/simulate.hpp"
#include "screff/types.hpp"

using namespace screff;

namespace {

ModelParams exponential_params(double rate1, double rate2, double rate3,
                               double frailty_var) {
  ModelParams params;
  for (int z : {0, 1}) {
    params.at(z, 1) = TransitionModel{1.0, rate1, {}};
    params.at(z, 2) = TransitionModel{1.0, rate2, {}};
    params.at(z, 3) = TransitionModel{1.0, rate3, {}};
  }
  params.frailty_var = frailty_var;
  return params;
}

SubjectRecord record(int z, double y_r, int dr, double y_t, int dt) {
  SubjectRecord s;
  s.id = "s";
  s.z = z;
  s.y_r = y_r;
  s.delta_r = dr;
  s.y_t = y_t;
  s.delta_t = dt;
  return s;
}

PosteriorDraws draws_from_params(const ParamLayout& layout,
                                 const std::vector<ModelParams>& list) {
  PosteriorDraws d;
  d.n_chains = 1;
  d.n_kept = static_cast<int>(list.size());
  d.dim = layout.dim();
  for (const auto& params : list) {
    const std::vector<double> u = layout.unconstrain(params);
    d.draws.insert(d.draws.end(), u.begin(), u.end());
    d.chain_id.push_back(0);
    d.log_post.push_back(0.0);
    d.divergent.push_back(0);
  }
  d.step_size = {1.0};
  d.n_divergent = {0};
  d.mean_accept = {0.9};
  return d;
}

}  // namespace

TEST_CASE("kaplan-meier fixtures") {
  // death at 1, censored at 2, death at 3:
  // S(1.5) = 2/3, S(3.5) = 2/3 * (1 - 1/1) = 0
  {
    const std::vector<double> times{1.0, 2.0, 3.0};
    const std::vector<int> events{1, 0, 1};
    const std::vector<double> eval{0.5, 1.0, 1.5, 3.5};
    const std::vector<double> s = km_estimate(times, events, eval);
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[1] == doctest::Approx(1.0));  // strictly-below convention
    CHECK(s[2] == doctest::Approx(2.0 / 3.0));
    CHECK(s[3] == doctest::Approx(0.0));
  }
  // no events at all: survival stays 1
  {
    const std::vector<double> times{1.0, 2.0, 3.0};
    const std::vector<int> events{0, 0, 0};
    const std::vector<double> eval{10.0};
    CHECK(km_estimate(times, events, eval)[0] == doctest::Approx(1.0));
  }
  // tied deaths: {1d, 1d, 2d, 3c}: S(1.5) = 1/2, S(2.5) = 1/2 * (1-1/2) = 1/4
  {
    const std::vector<double> times{1.0, 1.0, 2.0, 3.0};
    const std::vector<int> events{1, 1, 1, 0};
    const std::vector<double> eval{1.5, 2.5, 3.5};
    const std::vector<double> s = km_estimate(times, events, eval);
    CHECK(s[0] == doctest::Approx(0.5));
    CHECK(s[1] == doctest::Approx(0.25));
    CHECK(s[2] == doctest::Approx(0.25));  // censoring does not drop the curve
  }
}

TEST_CASE("censoring-free kaplan-meier equals the empirical survival") {
  std::mt19937_64 gen(71);
  std::uniform_real_distribution<double> td(0.1, 10.0);
  std::vector<double> times(60);
  for (double& t : times) t = td(gen);
  const std::vector<int> events(60, 1);
  const std::vector<double> eval{0.5, 2.0, 4.0, 6.5, 9.0, 11.0};
  const std::vector<double> s = km_estimate(times, events, eval);
  for (std::size_t k = 0; k < eval.size(); ++k) {
    int alive = 0;
    for (double t : times) alive += t >= eval[k];
    CHECK(s[k] == doctest::Approx(alive / 60.0).epsilon(1e-12));
  }
}

TEST_CASE("kaplan-meier properties: monotone, starts at one, order-free") {
  std::mt19937_64 gen(73);
  std::uniform_real_distribution<double> td(0.1, 8.0);
  std::bernoulli_distribution ed(0.6);
  std::vector<double> times(40);
  std::vector<int> events(40);
  for (int i = 0; i < 40; ++i) {
    times[i] = td(gen);
    events[i] = ed(gen);
  }
  std::vector<double> eval(30);
  for (int i = 0; i < 30; ++i) eval[i] = 0.3 * (i + 1);
  const std::vector<double> s = km_estimate(times, events, eval);
  CHECK(s.front() <= 1.0);
  for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k] <= s[k - 1] + 1e-15);

  // permutation invariance of the inputs
  std::vector<int> perm(40);
  for (int i = 0; i < 40; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<double> times2(40);
  std::vector<int> events2(40);
  for (int i = 0; i < 40; ++i) {
    times2[i] = times[perm[i]];
    events2[i] = events[perm[i]];
  }
  const std::vector<double> s2 = km_estimate(times2, events2, eval);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(s[k] == s2[k]);

  CHECK_THROWS_AS(km_estimate({}, {}, eval), std::invalid_argument);
  CHECK_THROWS_AS(
      km_estimate(std::vector<double>{-1.0}, std::vector<int>{1}, eval),
      std::invalid_argument);
  CHECK_THROWS_AS(
      km_estimate(std::vector<double>{1.0}, std::vector<int>{2}, eval),
      std::invalid_argument);
}

TEST_CASE("replicate censor times: censored keep y_t, deaths get the horizon") {
  const std::vector<SubjectRecord> data{
      record(0, 2.0, 0, 2.0, 0),   // censored at 2
      record(1, 1.0, 1, 5.0, 1),   // died at 5
      record(0, 3.0, 0, 3.0, 1),   // died at 3
      record(1, 7.0, 0, 7.0, 0),   // censored at 7 (the max y_t)
  };
  const std::vector<double> def = replicate_censor_times(data, 0.0);
  CHECK(def[0] == doctest::Approx(2.0));
  CHECK(def[1] == doctest::Approx(7.0));  // horizon = max observed y_t
  CHECK(def[2] == doctest::Approx(7.0));
  CHECK(def[3] == doctest::Approx(7.0));

  const std::vector<double> fixed = replicate_censor_times(data, 20.0);
  CHECK(fixed[0] == doctest::Approx(2.0));  // observed censoring still wins
  CHECK(fixed[1] == doctest::Approx(20.0));
  CHECK(fixed[2] == doctest::Approx(20.0));
  CHECK(fixed[3] == doctest::Approx(7.0));
}

TEST_CASE("replicates keep the design and resample the outcomes") {
  std::mt19937_64 gen(79);
  std::vector<SubjectRecord> data;
  for (int i = 0; i < 30; ++i) {
    SubjectRecord s = oracle::random_subject(gen, 2, i % 4);
    s.id = "id" + std::to_string(i);
    data.push_back(s);
  }
  ModelParams params = exponential_params(0.5, 0.3, 0.7, 0.6);
  for (auto& tr : params.transitions) tr.coef = {0.2, -0.1};
  const std::vector<double> censor = replicate_censor_times(data, 0.0);
  RngStream rng(811);
  const ReplicateData rep = generate_replicate(data, params, censor, rng);

  REQUIRE(rep.records.size() == data.size());
  REQUIRE(rep.outcomes.size() == data.size());
  REQUIRE(rep.frailty.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(rep.records[i].id == data[i].id);
    CHECK(rep.records[i].z == data[i].z);  // design is fixed
    CHECK(rep.records[i].x == data[i].x);
    CHECK_NOTHROW(validate(rep.records[i]));
    CHECK(rep.records[i].y_t <= censor[i] + 1e-12);
    CHECK(rep.frailty[i] > 0.0);
    // censored record coordinates derive from the replicate's own outcomes
    const double t_factual = data[i].z == 1 ? rep.outcomes[i].t1
                                            : rep.outcomes[i].t0;
    if (rep.records[i].delta_t == 1) {
      CHECK(rep.records[i].y_t == doctest::Approx(t_factual));
    } else {
      CHECK(t_factual > rep.records[i].y_t);
    }
  }
}

TEST_CASE("replicates with tiny frailty variance pin frailties near one") {
  std::mt19937_64 gen(83);
  std::vector<SubjectRecord> data;
  for (int i = 0; i < 25; ++i) data.push_back(oracle::random_subject(gen, 0, i % 4));
  ModelParams params = exponential_params(0.5, 0.3, 0.7, 1e-8);
  const std::vector<double> censor = replicate_censor_times(data, 0.0);
  RngStream rng(813);
  const ReplicateData rep = generate_replicate(data, params, censor, rng);
  for (double g : rep.frailty) CHECK(g == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("replicate marginals match the simulator at shared parameters") {
  // All subjects share one covariate value and arm, so replicate factual
  // records are draws from the same law simulate_dataset produces.
  const ModelParams params = exponential_params(0.45, 0.3, 0.8, 0.6);
  const int n = 20000;
  std::vector<SubjectRecord> data;
  for (int i = 0; i < n; ++i) data.push_back(record(1, 8.0, 0, 8.0, 0));

  const std::vector<double> censor(n, 1e9);  // effectively no censoring
  RngStream rng(817);
  const ReplicateData rep = generate_replicate(data, params, censor, rng);

  RngStream rng2(818);
  std::vector<double> t_direct(n);
  for (int i = 0; i < n; ++i) {
    const double g = rng2.gamma(1.0 / params.frailty_var,
                                1.0 / params.frailty_var);
    t_direct[i] = simulate_arm({}, g, 1, params, rng2).t;
  }
  std::vector<double> t_rep(n);
  for (int i = 0; i < n; ++i) t_rep[i] = rep.outcomes[i].t1;
  std::sort(t_rep.begin(), t_rep.end());
  std::sort(t_direct.begin(), t_direct.end());
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    CHECK(quantile_sorted(t_rep, p) ==
          doctest::Approx(quantile_sorted(t_direct, p)).epsilon(0.04));
  }
}

TEST_CASE("always-alive discrepancy: ties are not exceedances") {
  std::mt19937_64 gen(89);
  std::vector<PotentialOutcomeSet> obs;
  for (int i = 0; i < 20; ++i) {
    PotentialOutcomeSet po;
    po.t0 = 1.0 + i;
    po.t1 = 2.0 + i;
    obs.push_back(po);
  }
  const TimeGrid grid{{1.5, 5.0, 12.0}};
  const std::vector<int> self = discrepancy_aa(obs, obs, grid);
  for (int v : self) CHECK(v == 0);  // identical fractions: strictly-greater fails

  // raise every observed survival time: observed fraction dominates
  std::vector<PotentialOutcomeSet> longer = obs;
  for (auto& po : longer) {
    po.t0 += 50.0;
    po.t1 += 50.0;
  }
  const std::vector<int> dom = discrepancy_aa(longer, obs, grid);
  CHECK(dom[0] == 1);
  CHECK(dom[1] == 1);
  CHECK(dom[2] == 1);
}

TEST_CASE("kaplan-meier discrepancy flags stochastically smaller replicates") {
  // observed curve from long-lived subjects; replicate records die early
  std::vector<SubjectRecord> late, early;
  for (int i = 0; i < 12; ++i) {
    late.push_back(record(i % 2, 20.0 + i, 0, 20.0 + i, 1));
    early.push_back(record(i % 2, 1.0 + 0.1 * i, 0, 1.0 + 0.1 * i, 1));
  }
  const TimeGrid grid{{5.0, 15.0, 25.0}};
  const auto km_obs = km_by_arm(late, grid);
  // identical data: no strict exceedance anywhere
  const auto none = discrepancy_km(km_obs, late, grid);
  for (int arm : {0, 1})
    for (int v : none[arm]) CHECK(v == 0);
  // early-death replicate: observed exceeds at times past the early deaths
  const auto flagged = discrepancy_km(km_obs, early, grid);
  for (int arm : {0, 1}) {
    CHECK(flagged[arm][0] == 1);
    CHECK(flagged[arm][1] == 1);
  }
}

TEST_CASE("frailty ks discrepancy compares distances to the prior") {
  const double v = 0.8;
  const double a = 1.0 / v;
  // replicate drawn from the prior itself; observed shifted far away
  RngStream rng(97);
  std::vector<double> close(500), far(500);
  for (int i = 0; i < 500; ++i) {
    close[i] = rng.gamma(a, a);
    far[i] = close[i] + 3.0;
  }
  CHECK(discrepancy_ks(far, close, v) == 1);
  CHECK(discrepancy_ks(close, far, v) == 0);
  // a sample against itself ties, and ties are not exceedances
  CHECK(discrepancy_ks(close, close, v) == 0);
}

TEST_CASE("run_ppc outputs are in range, sized, and reproducible") {
  // small simulated study and a few perturbed parameter draws
  SimConfig sim;
  sim.n = 80;
  ModelParams truth = exponential_params(0.10, 0.05, 0.14, 0.5);
  for (int z : {0, 1})
    for (int j : {1, 2, 3}) truth.at(z, j).coef = {0.3, -0.2};
  sim.params = truth;
  sim.covariates = CovariateSpec{1, 1, 0.5};
  sim.c_admin = 12.0;
  sim.seed = 5150;
  const SimResult study = simulate_dataset(sim);

  const ParamLayout layout{2};
  std::mt19937_64 gen(99);
  std::vector<ModelParams> list;
  for (int b = 0; b < 6; ++b) {
    ModelParams p = truth;
    std::normal_distribution<double> jitter(0.0, 0.05);
    for (auto& tr : p.transitions) {
      tr.rate *= std::exp(jitter(gen));
      tr.shape *= std::exp(jitter(gen));
    }
    list.push_back(p);
  }
  const PosteriorDraws draws = draws_from_params(layout, list);
  const TimeGrid grid{{2.0, 5.0, 9.0}};

  PpcConfig cfg;
  const PpcReport rep = run_ppc(study.records, draws, layout, grid, 31, cfg);
  CHECK(rep.n_draws == 6);
  REQUIRE(rep.pppv_aa.size() == 3);
  REQUIRE(rep.pppv_km[0].size() == 3);
  REQUIRE(rep.pppv_km[1].size() == 3);
  for (double p : rep.pppv_aa) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  for (int arm : {0, 1})
    for (double p : rep.pppv_km[arm]) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  CHECK(rep.pppv_ks >= 0.0);
  CHECK(rep.pppv_ks <= 1.0);

  // reproducible, and thinning to all draws changes nothing
  const PpcReport rep2 = run_ppc(study.records, draws, layout, grid, 31, cfg);
  CHECK(rep.pppv_aa == rep2.pppv_aa);
  CHECK(rep.pppv_km[0] == rep2.pppv_km[0]);
  CHECK(rep.pppv_ks == rep2.pppv_ks);
  PpcConfig all;
  all.max_draws = 6;
  const PpcReport rep3 = run_ppc(study.records, draws, layout, grid, 31, all);
  CHECK(rep.pppv_aa == rep3.pppv_aa);

  // thread-count invariance
  PpcConfig threaded;
  threaded.n_threads = 4;
  const PpcReport rep4 =
      run_ppc(study.records, draws, layout, grid, 31, threaded);
  CHECK(rep.pppv_aa == rep4.pppv_aa);
  CHECK(rep.pppv_km[1] == rep4.pppv_km[1]);
  CHECK(rep.pppv_ks == rep4.pppv_ks);
}

TEST_CASE("run_ppc indicator aggregation matches a manual two-draw replay") {
  // Replays the documented stream keying: observed-side imputations use the
  // "impute" stage streams keyed by (draw, subject); replicates use
  // (stage_seed(seed, "ppc-replicate"), draw).
  std::mt19937_64 gen(103);
  std::vector<SubjectRecord> data;
  for (int i = 0; i < 15; ++i) {
    SubjectRecord s = oracle::random_subject(gen, 1, i % 4);
    s.id = "m" + std::to_string(i);
    data.push_back(s);
  }
  const ParamLayout layout{1};
  std::vector<ModelParams> list{oracle::random_params(gen, 1),
                                oracle::random_params(gen, 1)};
  const PosteriorDraws draws = draws_from_params(layout, list);
  const TimeGrid grid{{1.0, 2.5}};
  const std::uint64_t seed = 4096;

  const PpcReport rep = run_ppc(data, draws, layout, grid, seed, {});

  const std::uint64_t impute_seed = stage_seed(seed, "impute");
  const std::uint64_t rep_seed = stage_seed(seed, "ppc-replicate");
  const std::vector<double> censor = replicate_censor_times(data, 0.0);
  std::vector<double> aa_sum(grid.times.size(), 0.0);
  double ks_sum = 0.0;
  for (int b = 0; b < 2; ++b) {
    const DrawImputation obs = impute_one_draw(data, list[b], impute_seed, b);
    RngStream rng(rep_seed, b);
    const ReplicateData replicate =
        generate_replicate(data, list[b], censor, rng);
    const std::vector<int> aa =
        discrepancy_aa(obs.outcomes, replicate.outcomes, grid);
    for (std::size_t k = 0; k < aa.size(); ++k) aa_sum[k] += aa[k];
    ks_sum += discrepancy_ks(obs.frailty, replicate.frailty,
                             list[b].frailty_var);
  }
  for (std::size_t k = 0; k < grid.times.size(); ++k)
    CHECK(rep.pppv_aa[k] == doctest::Approx(aa_sum[k] / 2.0).epsilon(1e-14));
  CHECK(rep.pppv_ks == doctest::Approx(1.0 - ks_sum / 2.0).epsilon(1e-14));
}
