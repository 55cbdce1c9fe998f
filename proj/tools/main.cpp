#include <string>
#include <vector>

#include "CLI11.hpp"
#include "screff/pipeline.hpp"

namespace {

void add_grid_options(CLI::App* cmd, screff::GridSpec& grid) {
  cmd->add_option("--grid", grid.times,
                  "explicit evaluation times t1,t2,... (overrides "
                  "--grid-max/--grid-k)")
      ->delimiter(',');
  cmd->add_option("--grid-max", grid.grid_max,
                  "largest evaluation time for an equally spaced grid");
  cmd->add_option("--grid-k", grid.grid_k,
                  "number of equally spaced evaluation times");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Arm-specific Weibull illness-death models with a shared patient "
      "frailty: simulation, propensity matching, posterior sampling, "
      "principal-stratum effect estimation, and predictive checks."};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");

  screff::SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "generate a synthetic dataset with ground truth");
  c_sim->add_option("--out", sim.out_dir, "output directory");
  c_sim->add_option("--seed", sim.seed, "top-level RNG seed");
  c_sim->add_option("--n", sim.n, "number of subjects")
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--params", sim.params_file,
                    "JSON file with generator parameters (default: built-in "
                    "demo set)");
  c_sim->add_option("--normals", sim.n_normal,
                    "standard-normal covariate columns");
  c_sim->add_option("--binaries", sim.n_binary,
                    "Bernoulli covariate columns");
  c_sim->add_option("--binary-p", sim.binary_p,
                    "success probability of binary covariates");
  c_sim->add_option("--treat-prob", sim.treat_prob,
                    "randomized treatment probability");
  c_sim->add_option("--c-admin", sim.c_admin,
                    "administrative censoring time (<=0 disables)");
  c_sim->add_option("--c-uniform-max", sim.c_uniform_max,
                    "additional Uniform(0,max) censoring (<=0 disables)");
  c_sim->add_option("--frailty-dist", sim.frailty_dist,
                    "frailty law: gamma or lognormal");

  screff::PreprocessArgs pre;
  CLI::App* c_pre = app.add_subcommand(
      "preprocess", "propensity-score matching and covariate scaling");
  c_pre->add_option("data", pre.input, "input subject CSV")->required();
  c_pre->add_option("--out", pre.out_dir, "output directory");
  c_pre->add_option("--scale", pre.scale_columns,
                    "covariate columns to scale to unit sd (repeatable)")
      ->delimiter(',');
  c_pre->add_option("--caliper", pre.caliper,
                    "maximum propensity distance for a match (<=0: none)");

  screff::FitArgs fit;
  CLI::App* c_fit =
      app.add_subcommand("fit", "sample the posterior of the model");
  c_fit->add_option("data", fit.input, "input subject CSV")->required();
  c_fit->add_option("--out", fit.out_dir, "output directory");
  c_fit->add_option("--seed", fit.seed, "top-level RNG seed");
  c_fit->add_option("--chains", fit.chains, "number of chains")
      ->check(CLI::PositiveNumber);
  c_fit->add_option("--iter", fit.iter, "iterations per chain")
      ->check(CLI::PositiveNumber);
  c_fit->add_option("--warmup", fit.warmup, "adaptation iterations per chain");
  c_fit->add_option("--max-depth", fit.max_depth, "maximum NUTS tree depth");
  c_fit->add_option("--target-accept", fit.target_accept,
                    "dual-averaging acceptance target");
  bool fit_serial = false;
  c_fit->add_flag("--serial", fit_serial, "run chains sequentially");

  screff::EstimateArgs est;
  CLI::App* c_est = app.add_subcommand(
      "estimate", "impute potential outcomes and summarize causal effects");
  c_est->add_option("data", est.data, "input subject CSV")->required();
  c_est->add_option("--fit-dir", est.fit_dir,
                    "directory containing draws.csv from `fit`")
      ->required();
  c_est->add_option("--out", est.out_dir, "output directory");
  c_est->add_option("--seed", est.seed, "top-level RNG seed");
  add_grid_options(c_est, est.grid);
  c_est->add_option("--max-draws", est.max_draws,
                    "cap on posterior draws used (0 = all)");
  c_est->add_flag("--potential-outcomes", est.write_potential_outcomes,
                  "also write per-draw imputed potential outcomes");
  c_est->add_option("--threads", est.n_threads,
                    "worker threads (0 = hardware)");

  screff::PpcArgs ppc;
  CLI::App* c_ppc =
      app.add_subcommand("ppc", "posterior-predictive checks");
  c_ppc->add_option("data", ppc.data, "input subject CSV")->required();
  c_ppc->add_option("--fit-dir", ppc.fit_dir,
                    "directory containing draws.csv from `fit`")
      ->required();
  c_ppc->add_option("--out", ppc.out_dir, "output directory");
  c_ppc->add_option("--seed", ppc.seed, "top-level RNG seed");
  add_grid_options(c_ppc, ppc.grid);
  c_ppc->add_option("--draws", ppc.max_draws,
                    "replicates to generate (0 = every retained draw)");
  c_ppc->add_option("--horizon", ppc.horizon,
                    "replicate censoring horizon (0 = max observed y_t)");
  c_ppc->add_option("--threads", ppc.n_threads,
                    "worker threads (0 = hardware)");

  screff::ReportArgs rep;
  CLI::App* c_rep = app.add_subcommand(
      "report", "posterior summaries and plot-ready tables");
  c_rep->add_option("data", rep.data, "input subject CSV")->required();
  c_rep->add_option("--fit-dir", rep.fit_dir,
                    "directory containing draws.csv from `fit`")
      ->required();
  c_rep->add_option("--out", rep.out_dir, "output directory");
  c_rep->add_option("--seed", rep.seed, "top-level RNG seed");
  add_grid_options(c_rep, rep.grid);
  c_rep->add_option("--max-draws", rep.max_draws,
                    "cap on posterior draws used (0 = all)");
  c_rep->add_option("--profile-reps", rep.profile_reps,
                    "simulated outcome pairs per draw for profile rows");
  c_rep->add_option("--profile-x", rep.profile_x,
                    "covariate profile v1,v2,... (default: all zeros)")
      ->delimiter(',');
  c_rep->add_option("--threads", rep.n_threads,
                    "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // parse problems are validation failures
  }

  if (c_sim->parsed()) return screff::cmd_simulate(sim);
  if (c_pre->parsed()) return screff::cmd_preprocess(pre);
  if (c_fit->parsed()) {
    fit.parallel = !fit_serial;
    return screff::cmd_fit(fit);
  }
  if (c_est->parsed()) return screff::cmd_estimate(est);
  if (c_ppc->parsed()) return screff::cmd_ppc(ppc);
  if (c_rep->parsed()) return screff::cmd_report(rep);
  return 2;
}
