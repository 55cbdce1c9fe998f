#include "screff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "screff/diagnostics.hpp"
#include "screff/frailty.hpp"
#include "screff/likelihood.hpp"
#include "screff/numeric.hpp"
#include "screff/parallel.hpp"
#include "screff/posterior.hpp"
#include "screff/ppc.hpp"
#include "screff/preprocess.hpp"
#include "screff/priors.hpp"
#include "screff/rng.hpp"
#include "screff/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace screff {

namespace {

int guarded(const char* cmd, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << cmd << ": error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << cmd << ": error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << cmd << ": error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << cmd << ": numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << cmd << ": failure: " << e.what() << '\n';
    return 3;
  }
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory " + dir + ": " +
                      ec.message());
}

void write_json_file(const std::string& path, const json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

const char* kTransitionKeys[6] = {"z0_t1", "z0_t2", "z0_t3",
                                  "z1_t1", "z1_t2", "z1_t3"};

/// Natural-scale transform of one unconstrained coordinate.
double to_natural(const ParamLayout& layout, int k, double u) {
  return (k < 12 || k == layout.log_frailty_var()) ? std::exp(u) : u;
}

double from_natural(const ParamLayout& layout, int k, double v) {
  if (k < 12 || k == layout.log_frailty_var()) {
    if (!(v > 0.0))
      throw ConfigError("parameter column " + std::to_string(k) +
                        " must be positive, got " + format_double(v));
    return std::log(v);
  }
  return v;
}

double parse_cell_double(const std::string& cell, const std::string& path,
                         std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size())
    throw ConfigError(path + " line " + std::to_string(line) +
                      ": non-numeric value '" + cell + "'");
  return v;
}

json params_to_json(const ModelParams& params,
                    std::span<const std::string> covariate_names) {
  json transitions = json::object();
  for (int z = 0; z < 2; ++z)
    for (int j = 1; j <= 3; ++j) {
      const TransitionModel& tr = params.at(z, j);
      transitions[kTransitionKeys[ModelParams::index(z, j)]] = {
          {"shape", tr.shape}, {"rate", tr.rate}, {"coef", tr.coef}};
    }
  return {{"frailty_var", params.frailty_var},
          {"covariates", std::vector<std::string>(covariate_names.begin(),
                                                  covariate_names.end())},
          {"transitions", transitions}};
}

json summarize_parameters(const PosteriorDraws& draws,
                          const ParamLayout& layout,
                          std::span<const std::string> covariate_names,
                          double* max_rhat, double* min_ess) {
  const auto names = layout.parameter_names(covariate_names);
  json out = json::array();
  *max_rhat = 0.0;
  *min_ess = std::numeric_limits<double>::infinity();
  const bool can_diag = draws.n_chains >= 2 && draws.n_kept >= 4;
  for (int k = 0; k < layout.dim(); ++k) {
    std::vector<double> col = draws.column(k);
    for (double& v : col) v = to_natural(layout, k, v);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd =
        col.size() > 1 ? std::sqrt(ss / static_cast<double>(col.size() - 1))
                       : 0.0;
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    json entry = {{"name", names[k]},
                  {"mean", mean},
                  {"sd", sd},
                  {"q025", quantile_sorted(sorted, 0.025)},
                  {"q500", quantile_sorted(sorted, 0.5)},
                  {"q975", quantile_sorted(sorted, 0.975)}};
    if (can_diag) {
      const double rhat = split_rhat(col, draws.n_chains, draws.n_kept);
      const double ess = split_ess(col, draws.n_chains, draws.n_kept);
      entry["rhat"] = std::isfinite(rhat) ? json(rhat) : json();
      entry["ess"] = std::isfinite(ess) ? json(ess) : json();
      if (std::isfinite(rhat)) *max_rhat = std::max(*max_rhat, rhat);
      if (std::isfinite(ess)) *min_ess = std::min(*min_ess, ess);
    } else {
      entry["rhat"] = json();
      entry["ess"] = json();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

json grid_to_json(const GridSpec& spec) {
  return {{"times", spec.times},
          {"grid_max", spec.grid_max},
          {"grid_k", spec.grid_k}};
}

std::string po_cell(const std::optional<double>& r) {
  return r ? format_double(*r) : std::string();
}

/// Draw indices used by estimate/report/ppc when thinning: evenly spaced
/// over the retained rows, preserving original indices so imputation
/// streams match across commands.
std::vector<int> thin_indices(int total, int max_draws) {
  const int use = max_draws > 0 ? std::min(max_draws, total) : total;
  std::vector<int> idx(use);
  for (int k = 0; k < use; ++k)
    idx[k] = static_cast<int>((static_cast<long long>(k) * total) /
                              static_cast<long long>(use));
  return idx;
}

}  // namespace

ModelParams params_from_json_text(const std::string& text,
                                  std::vector<std::string>* covariate_names) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid parameter JSON: ") + e.what());
  }
  ModelParams params;
  try {
    params.frailty_var = j.at("frailty_var").get<double>();
    const json& tr = j.at("transitions");
    for (int idx = 0; idx < 6; ++idx) {
      const json& t = tr.at(kTransitionKeys[idx]);
      params.transitions[idx].shape = t.at("shape").get<double>();
      params.transitions[idx].rate = t.at("rate").get<double>();
      params.transitions[idx].coef =
          t.at("coef").get<std::vector<double>>();
    }
    if (covariate_names) {
      *covariate_names = j.value("covariates", std::vector<std::string>{});
      if (covariate_names->empty())
        for (std::size_t k = 0; k < params.transitions[0].coef.size(); ++k)
          covariate_names->push_back("x" + std::to_string(k + 1));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parameter JSON missing field: ") +
                      e.what());
  }
  validate(params);
  if (covariate_names &&
      covariate_names->size() != params.transitions[0].coef.size())
    throw ConfigError("parameter JSON: covariates list length differs from "
                      "coefficient length");
  return params;
}

std::string params_to_json_text(const ModelParams& params,
                                std::span<const std::string> covariate_names) {
  return params_to_json(params, covariate_names).dump(2) + "\n";
}

ModelParams demo_params() {
  ModelParams p;
  p.frailty_var = 0.5;
  // Rates per day, tuned so a 90-day study sees roughly a third of
  // subjects with the nonterminal event and a quarter dying.
  const double rates[6] = {0.009, 0.004, 0.013, 0.006, 0.0035, 0.010};
  const double shapes[6] = {1.0, 1.1, 0.95, 1.0, 1.1, 0.95};
  for (int idx = 0; idx < 6; ++idx) {
    p.transitions[idx].shape = shapes[idx];
    p.transitions[idx].rate = rates[idx];
    p.transitions[idx].coef = {0.3, -0.2};
  }
  return p;
}

TimeGrid resolve_grid(const GridSpec& spec,
                      std::span<const SubjectRecord> data) {
  TimeGrid grid;
  if (!spec.times.empty()) {
    grid.times = spec.times;
  } else if (spec.grid_max > 0.0 && spec.grid_k > 0) {
    grid.times.resize(spec.grid_k);
    for (int i = 0; i < spec.grid_k; ++i)
      grid.times[i] =
          spec.grid_max * static_cast<double>(i + 1) / spec.grid_k;
  } else {
    grid = default_time_grid(data);
  }
  validate_grid_against_data(grid, data);
  return grid;
}

int cmd_simulate(const SimulateArgs& args) {
  return guarded("simulate", [&] {
    ensure_out_dir(args.out_dir);
    SimConfig cfg;
    cfg.n = args.n;
    cfg.seed = args.seed;
    cfg.covariates.n_normal = args.n_normal;
    cfg.covariates.n_binary = args.n_binary;
    cfg.covariates.binary_p = args.binary_p;
    cfg.treat_prob = args.treat_prob;
    std::vector<std::string> covariate_names;
    if (!args.params_file.empty()) {
      cfg.params = params_from_json_text(read_text_file(args.params_file),
                                         &covariate_names);
      if (static_cast<int>(covariate_names.size()) != cfg.covariates.total())
        throw ConfigError(
            "parameter file has " + std::to_string(covariate_names.size()) +
            " coefficients per transition but the covariate generator makes " +
            std::to_string(cfg.covariates.total()) +
            " columns; adjust --normals/--binaries");
    } else {
      if (cfg.covariates.total() != 2)
        throw ConfigError(
            "built-in demo parameters expect 2 covariates; pass --params "
            "for a different covariate layout");
      cfg.params = demo_params();
      covariate_names = cfg.covariates.names();
    }
    if (args.c_admin > 0.0) cfg.c_admin = args.c_admin;
    if (args.c_uniform_max > 0.0) cfg.c_uniform_max = args.c_uniform_max;
    if (args.frailty_dist == "gamma") {
      cfg.frailty_dist = SimConfig::FrailtyDist::Gamma;
    } else if (args.frailty_dist == "lognormal") {
      cfg.frailty_dist = SimConfig::FrailtyDist::LogNormal;
    } else {
      throw ConfigError("frailty_dist must be 'gamma' or 'lognormal', got '" +
                        args.frailty_dist + "'");
    }

    const SimResult res = simulate_dataset(cfg);
    write_subject_csv(join_path(args.out_dir, "data.csv"), res.records,
                      covariate_names);

    std::vector<std::string> header = {"id", "frailty", "r0",
                                       "t0", "r1",      "t1"};
    std::vector<std::vector<std::string>> rows;
    rows.reserve(res.records.size());
    for (std::size_t i = 0; i < res.records.size(); ++i) {
      const auto& po = res.truth[i];
      rows.push_back({res.records[i].id, format_double(res.frailty[i]),
                      po_cell(po.r0), format_double(po.t0), po_cell(po.r1),
                      format_double(po.t1)});
    }
    write_csv(join_path(args.out_dir, "truth.csv"), header, rows);

    json echo = {{"command", "simulate"},
                 {"out_dir", args.out_dir},
                 {"seed", args.seed},
                 {"n", args.n},
                 {"params", params_to_json(cfg.params, covariate_names)},
                 {"covariates",
                  {{"n_normal", cfg.covariates.n_normal},
                   {"n_binary", cfg.covariates.n_binary},
                   {"binary_p", cfg.covariates.binary_p}}},
                 {"treat_prob", cfg.treat_prob},
                 {"c_admin", cfg.c_admin ? json(*cfg.c_admin) : json()},
                 {"c_uniform_max",
                  cfg.c_uniform_max ? json(*cfg.c_uniform_max) : json()},
                 {"frailty_dist", args.frailty_dist}};
    write_json_file(join_path(args.out_dir, "simulate_config.json"), echo);

    int n_r = 0, n_t = 0;
    for (const auto& s : res.records) {
      n_r += s.delta_r;
      n_t += s.delta_t;
    }
    std::cout << "simulate: wrote " << res.records.size() << " subjects to "
              << join_path(args.out_dir, "data.csv") << " (" << n_r
              << " nonterminal events, " << n_t << " deaths)\n";
  });
}

int cmd_preprocess(const PreprocessArgs& args) {
  return guarded("preprocess", [&] {
    ensure_out_dir(args.out_dir);
    const Dataset ds = read_subject_csv(args.input);
    const double caliper = args.caliper > 0.0
                               ? args.caliper
                               : std::numeric_limits<double>::infinity();
    const PreprocessResult res = preprocess_dataset(
        ds.records, ds.covariate_names,
        std::span<const std::string>(args.scale_columns), caliper);

    write_subject_csv(join_path(args.out_dir, "matched.csv"), res.matched,
                      ds.covariate_names);

    const auto& rep = res.report;
    json coef = json::object();
    coef["intercept"] = rep.fit.coef[0];
    for (std::size_t k = 0; k < ds.covariate_names.size(); ++k)
      coef[ds.covariate_names[k]] = rep.fit.coef[k + 1];
    json pairs = json::array();
    for (const auto& [ti, ci] : rep.pairs)
      pairs.push_back({ds.records[ti].id, ds.records[ci].id});
    json scaling = json::object();
    for (std::size_t k = 0; k < ds.covariate_names.size(); ++k)
      scaling[ds.covariate_names[k]] = {{"offset", rep.offset[k]},
                                        {"scale", rep.scale[k]}};
    json smd = json::object();
    for (std::size_t k = 0; k < ds.covariate_names.size(); ++k)
      smd[ds.covariate_names[k]] = {{"before", rep.smd_before[k]},
                                    {"after", rep.smd_after[k]}};
    json report = {{"n_input", ds.records.size()},
                   {"n_treated", rep.n_treated},
                   {"n_matched_controls", rep.n_matched_controls},
                   {"propensity_model",
                    {{"coefficients", coef},
                     {"converged", rep.fit.converged},
                     {"n_iter", rep.fit.n_iter}}},
                   {"pairs", pairs},
                   {"scaling", scaling},
                   {"standardized_mean_differences", smd}};
    write_json_file(join_path(args.out_dir, "preprocess_report.json"),
                    report);

    json echo = {{"command", "preprocess"},
                 {"input", args.input},
                 {"out_dir", args.out_dir},
                 {"scale_columns", args.scale_columns},
                 {"caliper", args.caliper > 0.0 ? json(args.caliper) : json()}};
    write_json_file(join_path(args.out_dir, "preprocess_config.json"), echo);

    std::cout << "preprocess: matched " << rep.n_matched_controls << " of "
              << rep.n_treated << " treated subjects; wrote "
              << join_path(args.out_dir, "matched.csv") << " ("
              << res.matched.size() << " records)\n";
  });
}

int cmd_fit(const FitArgs& args) {
  return guarded("fit", [&] {
    ensure_out_dir(args.out_dir);
    const Dataset ds = read_subject_csv(args.input);
    const PriorSpec priors = derive_hyperparams(ds.records);
    auto model = std::make_shared<const LikelihoodModel>(ds.records);
    const Target target = make_posterior_target(model, priors);

    SamplerConfig scfg;
    scfg.n_chains = args.chains;
    scfg.n_iter = args.iter;
    scfg.n_warmup = args.warmup;
    scfg.max_tree_depth = args.max_depth;
    scfg.target_accept = args.target_accept;
    scfg.seed = stage_seed(args.seed, "fit");
    scfg.parallel_chains = args.parallel;
    const PosteriorDraws draws = sample_posterior(target, scfg);

    const ParamLayout layout{static_cast<int>(ds.covariate_names.size())};
    const auto names = layout.parameter_names(ds.covariate_names);

    std::vector<std::string> header = {"chain", "iteration", "log_post",
                                       "divergent"};
    header.insert(header.end(), names.begin(), names.end());
    std::vector<std::vector<std::string>> rows;
    rows.reserve(draws.total_rows());
    for (int r = 0; r < draws.total_rows(); ++r) {
      std::vector<std::string> row;
      row.reserve(header.size());
      row.push_back(std::to_string(draws.chain_id[r]));
      row.push_back(std::to_string(r % draws.n_kept));
      row.push_back(format_double(draws.log_post[r]));
      row.push_back(std::to_string(static_cast<int>(draws.divergent[r])));
      for (int k = 0; k < layout.dim(); ++k)
        row.push_back(format_double(to_natural(layout, k, draws.value(r, k))));
      rows.push_back(std::move(row));
    }
    write_csv(join_path(args.out_dir, "draws.csv"), header, rows);

    double max_rhat = 0.0, min_ess = 0.0;
    json params_json = summarize_parameters(draws, layout, ds.covariate_names,
                                            &max_rhat, &min_ess);
    int total_div = 0;
    for (int d : draws.n_divergent) total_div += d;
    json warnings = json::array();
    for (const auto& entry : params_json)
      if (!entry["rhat"].is_null() && entry["rhat"].get<double>() > 1.01)
        warnings.push_back("split R-hat above 1.01 for " +
                           entry["name"].get<std::string>());
    if (total_div > 0)
      warnings.push_back(std::to_string(total_div) +
                         " divergent transitions after warmup");
    json diag = {{"parameters", params_json},
                 {"max_rhat", max_rhat},
                 {"min_ess", min_ess},
                 {"n_divergent", draws.n_divergent},
                 {"total_divergent", total_div},
                 {"step_size", draws.step_size},
                 {"mean_accept", draws.mean_accept},
                 {"n_chains", draws.n_chains},
                 {"n_kept_per_chain", draws.n_kept},
                 {"warnings", warnings}};
    write_json_file(join_path(args.out_dir, "diagnostics.json"), diag);

    json echo = {{"command", "fit"},
                 {"input", args.input},
                 {"out_dir", args.out_dir},
                 {"seed", args.seed},
                 {"chains", args.chains},
                 {"iter", args.iter},
                 {"warmup", args.warmup},
                 {"max_depth", args.max_depth},
                 {"target_accept", args.target_accept},
                 {"parallel", args.parallel},
                 {"n_subjects", ds.records.size()},
                 {"covariates", ds.covariate_names},
                 {"priors",
                  {{"coef_sd", priors.coef_sd},
                   {"log_rate_mean", priors.log_rate_mean},
                   {"log_rate_sd", priors.log_rate_sd},
                   {"log_shape_sd", priors.log_shape_sd},
                   {"log_frailty_var_mean", priors.log_frailty_var_mean},
                   {"log_frailty_var_sd", priors.log_frailty_var_sd}}}};
    write_json_file(join_path(args.out_dir, "fit_config.json"), echo);

    std::cout << "fit: " << draws.n_chains << " chains x " << draws.n_kept
              << " kept draws; max split R-hat "
              << format_double(max_rhat) << ", min ESS "
              << format_double(min_ess) << ", divergences " << total_div
              << "\n";
  });
}

FitArtifacts load_fit(const std::string& fit_dir) {
  const std::string config_path = join_path(fit_dir, "fit_config.json");
  if (!fs::exists(config_path))
    throw ConfigError("missing " + config_path + " (run `fit` first)");
  const std::string draws_path = join_path(fit_dir, "draws.csv");
  if (!fs::exists(draws_path))
    throw ConfigError("missing " + draws_path + " (run `fit` first)");

  json config;
  try {
    config = json::parse(read_text_file(config_path));
  } catch (const json::parse_error& e) {
    throw ConfigError(config_path + ": " + e.what());
  }
  FitArtifacts art;
  art.covariate_names =
      config.at("covariates").get<std::vector<std::string>>();
  art.layout = ParamLayout{static_cast<int>(art.covariate_names.size())};

  const auto rows = read_csv(draws_path);
  if (rows.size() < 2) throw ConfigError(draws_path + ": no draws");
  const auto expected = art.layout.parameter_names(art.covariate_names);
  const auto& header = rows[0];
  if (header.size() != expected.size() + 4)
    throw ConfigError(draws_path + ": expected " +
                      std::to_string(expected.size() + 4) + " columns, got " +
                      std::to_string(header.size()));
  static const char* fixed[] = {"chain", "iteration", "log_post", "divergent"};
  for (int k = 0; k < 4; ++k)
    if (header[k] != fixed[k])
      throw ConfigError(draws_path + ": column " + std::to_string(k + 1) +
                        " must be '" + fixed[k] + "', got '" + header[k] +
                        "'");
  for (std::size_t k = 0; k < expected.size(); ++k)
    if (header[k + 4] != expected[k])
      throw ConfigError(draws_path + ": parameter column '" + header[k + 4] +
                        "' does not match the fit layout ('" + expected[k] +
                        "' expected); was the file edited?");

  PosteriorDraws& d = art.draws;
  d.dim = art.layout.dim();
  const std::size_t n_rows = rows.size() - 1;
  d.draws.reserve(n_rows * d.dim);
  int max_chain = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != header.size())
      throw ConfigError(draws_path + " line " + std::to_string(line) +
                        ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(row.size()));
    const int chain =
        static_cast<int>(parse_cell_double(row[0], draws_path, line));
    max_chain = std::max(max_chain, chain);
    d.chain_id.push_back(chain);
    d.log_post.push_back(parse_cell_double(row[2], draws_path, line));
    d.divergent.push_back(
        parse_cell_double(row[3], draws_path, line) != 0.0 ? 1 : 0);
    for (int k = 0; k < d.dim; ++k)
      d.draws.push_back(from_natural(
          art.layout, k, parse_cell_double(row[k + 4], draws_path, line)));
  }
  d.n_chains = max_chain + 1;
  if (n_rows % static_cast<std::size_t>(d.n_chains) != 0)
    throw ConfigError(draws_path + ": " + std::to_string(n_rows) +
                      " rows do not divide evenly into " +
                      std::to_string(d.n_chains) + " chains");
  d.n_kept = static_cast<int>(n_rows) / d.n_chains;
  return art;
}

namespace {

/// Shared loading for the post-fit commands; validates that the data file
/// matches the fit's covariates.
struct PostFitInputs {
  Dataset ds;
  FitArtifacts fit;
  TimeGrid grid;
};

PostFitInputs load_post_fit(const std::string& data_path,
                            const std::string& fit_dir,
                            const GridSpec& grid_spec) {
  PostFitInputs in;
  in.ds = read_subject_csv(data_path);
  in.fit = load_fit(fit_dir);
  if (in.ds.covariate_names != in.fit.covariate_names)
    throw ConfigError("covariates in " + data_path +
                      " do not match the fit in " + fit_dir);
  in.grid = resolve_grid(grid_spec, in.ds.records);
  return in;
}

/// Imputations for the selected draw rows, keyed by original row index.
struct SelectedImputations {
  std::vector<int> idx;
  std::vector<std::vector<PotentialOutcomeSet>> outcomes;
  std::vector<std::vector<double>> frailty;
};

SelectedImputations impute_selected(const PostFitInputs& in,
                                    std::uint64_t seed, int max_draws,
                                    int n_threads) {
  SelectedImputations sel;
  sel.idx = thin_indices(in.fit.draws.total_rows(), max_draws);
  const std::uint64_t impute_seed = stage_seed(seed, "impute");
  const int m = static_cast<int>(sel.idx.size());
  sel.outcomes.resize(m);
  sel.frailty.resize(m);
  parallel_for(
      m,
      [&](int s) {
        const int b = sel.idx[s];
        const ModelParams params =
            in.fit.layout.constrain(in.fit.draws.row(b));
        DrawImputation one =
            impute_one_draw(in.ds.records, params, impute_seed, b);
        sel.outcomes[s] = std::move(one.outcomes);
        sel.frailty[s] = std::move(one.frailty);
      },
      n_threads);
  return sel;
}

}  // namespace

int cmd_estimate(const EstimateArgs& args) {
  return guarded("estimate", [&] {
    ensure_out_dir(args.out_dir);
    const PostFitInputs in = load_post_fit(args.data, args.fit_dir, args.grid);
    const SelectedImputations sel =
        impute_selected(in, args.seed, args.max_draws, args.n_threads);
    const EstimandGrid grid_summary =
        summarize_grid(sel.outcomes, in.grid, args.n_threads);

    std::vector<std::string> est_header = {"estimand", "r",    "t",
                                           "mean",     "median", "lo95",
                                           "hi95",     "n_draws_defined"};
    std::vector<std::vector<std::string>> est_rows;
    auto emit = [&](const char* name, const CellSummary& c) {
      est_rows.push_back({name, format_double(c.r), format_double(c.t),
                          format_double(c.mean), format_double(c.median),
                          format_double(c.lo95), format_double(c.hi95),
                          std::to_string(c.n_draws_defined)});
    };
    for (const auto& c : grid_summary.tv_sace) emit("tv_sace", c);
    for (const auto& c : grid_summary.rm_sace) emit("rm_sace", c);
    write_csv(join_path(args.out_dir, "estimands.csv"), est_header, est_rows);

    std::vector<std::string> st_header = {"t"};
    static const char* state_names[4] = {"p_aa", "p_tk", "p_ck", "p_dd"};
    for (const char* s : state_names) {
      st_header.push_back(std::string(s) + "_mean");
      st_header.push_back(std::string(s) + "_lo95");
      st_header.push_back(std::string(s) + "_hi95");
    }
    std::vector<std::vector<std::string>> st_rows;
    for (const auto& st : grid_summary.states) {
      std::vector<std::string> row = {format_double(st.t)};
      for (int s = 0; s < 4; ++s) {
        row.push_back(format_double(st.mean[s]));
        row.push_back(format_double(st.lo95[s]));
        row.push_back(format_double(st.hi95[s]));
      }
      st_rows.push_back(std::move(row));
    }
    write_csv(join_path(args.out_dir, "states.csv"), st_header, st_rows);

    if (args.write_potential_outcomes) {
      std::vector<std::string> po_header = {"draw", "id", "frailty", "r0",
                                            "t0",   "r1", "t1"};
      std::vector<std::vector<std::string>> po_rows;
      po_rows.reserve(sel.idx.size() * in.ds.records.size());
      for (std::size_t s = 0; s < sel.idx.size(); ++s)
        for (std::size_t i = 0; i < in.ds.records.size(); ++i) {
          const auto& po = sel.outcomes[s][i];
          po_rows.push_back({std::to_string(sel.idx[s]), in.ds.records[i].id,
                             format_double(sel.frailty[s][i]), po_cell(po.r0),
                             format_double(po.t0), po_cell(po.r1),
                             format_double(po.t1)});
        }
      write_csv(join_path(args.out_dir, "potential_outcomes.csv"), po_header,
                po_rows);
    }

    json echo = {{"command", "estimate"},
                 {"data", args.data},
                 {"fit_dir", args.fit_dir},
                 {"out_dir", args.out_dir},
                 {"seed", args.seed},
                 {"grid", grid_to_json(args.grid)},
                 {"grid_resolved", in.grid.times},
                 {"max_draws", args.max_draws},
                 {"n_draws_used", sel.idx.size()},
                 {"write_potential_outcomes", args.write_potential_outcomes}};
    write_json_file(join_path(args.out_dir, "estimate_config.json"), echo);

    std::cout << "estimate: " << sel.idx.size() << " draws over "
              << in.grid.times.size() << " grid times; wrote "
              << join_path(args.out_dir, "estimands.csv") << " and "
              << join_path(args.out_dir, "states.csv") << "\n";
  });
}

int cmd_ppc(const PpcArgs& args) {
  return guarded("ppc", [&] {
    ensure_out_dir(args.out_dir);
    const PostFitInputs in = load_post_fit(args.data, args.fit_dir, args.grid);
    PpcConfig cfg;
    cfg.max_draws = args.max_draws;
    cfg.horizon = args.horizon;
    cfg.n_threads = args.n_threads;
    const PpcReport rep = run_ppc(in.ds.records, in.fit.draws, in.fit.layout,
                                  in.grid, args.seed, cfg);

    json aa = json::array();
    for (std::size_t k = 0; k < rep.grid.times.size(); ++k)
      aa.push_back({{"t", rep.grid.times[k]}, {"p", rep.pppv_aa[k]}});
    json km = json::array();
    for (int z = 0; z < 2; ++z)
      for (std::size_t k = 0; k < rep.grid.times.size(); ++k)
        km.push_back({{"z", z},
                      {"t", rep.grid.times[k]},
                      {"p", rep.pppv_km[z][k]}});
    json out = {{"pppv_ks", rep.pppv_ks},
                {"pppv_aa", aa},
                {"pppv_km", km},
                {"B", rep.n_draws}};
    write_json_file(join_path(args.out_dir, "ppc.json"), out);

    json echo = {{"command", "ppc"},
                 {"data", args.data},
                 {"fit_dir", args.fit_dir},
                 {"out_dir", args.out_dir},
                 {"seed", args.seed},
                 {"grid", grid_to_json(args.grid)},
                 {"grid_resolved", in.grid.times},
                 {"max_draws", args.max_draws},
                 {"horizon", args.horizon},
                 {"B_used", rep.n_draws}};
    write_json_file(join_path(args.out_dir, "ppc_config.json"), echo);

    double lo = 1.0, hi = 0.0;
    for (double p : rep.pppv_aa) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    std::cout << "ppc: B=" << rep.n_draws << ", frailty fit p-value "
              << format_double(rep.pppv_ks) << ", always-alive p-values in ["
              << format_double(lo) << ", " << format_double(hi) << "]\n";
  });
}

int cmd_report(const ReportArgs& args) {
  return guarded("report", [&] {
    ensure_out_dir(args.out_dir);
    const PostFitInputs in = load_post_fit(args.data, args.fit_dir, args.grid);
    const SelectedImputations sel =
        impute_selected(in, args.seed, args.max_draws, args.n_threads);
    const int m = static_cast<int>(sel.idx.size());
    const std::size_t K = in.grid.times.size();

    // Per-draw state mixes and diagonal effects.
    std::vector<DrawEstimates> per_draw(m);
    parallel_for(
        m,
        [&](int s) {
          per_draw[s] = compute_draw_estimates(sel.outcomes[s], in.grid);
        },
        args.n_threads);

    // Arm survival curves: alive-under-control = AA + TreatmentKilled,
    // alive-under-treatment = AA + ControlKilled.
    std::vector<std::string> surv_header = {"t", "arm", "mean", "lo95",
                                            "hi95"};
    std::vector<std::vector<std::string>> surv_rows;
    for (std::size_t k = 0; k < K; ++k) {
      for (int arm = 0; arm < 2; ++arm) {
        std::vector<double> vals(m);
        for (int s = 0; s < m; ++s) {
          const double* mix = &per_draw[s].state_mix[4 * k];
          vals[s] = arm == 0 ? mix[0] + mix[1] : mix[0] + mix[2];
        }
        std::sort(vals.begin(), vals.end());
        surv_rows.push_back({format_double(in.grid.times[k]),
                             std::to_string(arm),
                             format_double(std::accumulate(vals.begin(),
                                                           vals.end(), 0.0) /
                                           m),
                             format_double(quantile_sorted(vals, 0.025)),
                             format_double(quantile_sorted(vals, 0.975))});
      }
    }
    write_csv(join_path(args.out_dir, "survival_curves.csv"), surv_header,
              surv_rows);

    // Diagonal snapshot curves: per-t effect among the then-always-alive.
    std::vector<std::string> qm_header = {
        "t",       "q_mean", "q_median", "q_lo95",   "q_hi95", "m_mean",
        "m_median", "m_lo95", "m_hi95",   "n_draws_defined"};
    std::vector<std::vector<std::string>> qm_rows;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t cell = k * (k + 1) / 2 + k;
      std::vector<double> q, mm;
      for (int s = 0; s < m; ++s) {
        const double tv = per_draw[s].tv[cell];
        if (!std::isnan(tv)) {
          q.push_back(tv);
          mm.push_back(per_draw[s].rm[cell]);
        }
      }
      std::sort(q.begin(), q.end());
      std::sort(mm.begin(), mm.end());
      auto cellstats = [](std::vector<double>& v) {
        if (v.empty())
          return std::array<double, 4>{NAN, NAN, NAN, NAN};
        const double mean =
            std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        return std::array<double, 4>{mean, quantile_sorted(v, 0.5),
                                     quantile_sorted(v, 0.025),
                                     quantile_sorted(v, 0.975)};
      };
      const auto qs = cellstats(q);
      const auto ms = cellstats(mm);
      qm_rows.push_back({format_double(in.grid.times[k]), format_double(qs[0]),
                         format_double(qs[1]), format_double(qs[2]),
                         format_double(qs[3]), format_double(ms[0]),
                         format_double(ms[1]), format_double(ms[2]),
                         format_double(ms[3]),
                         std::to_string(q.size())});
    }
    write_csv(join_path(args.out_dir, "qm_curves.csv"), qm_header, qm_rows);

    // In-sample posterior-predictive frailty density against the gamma
    // density at the posterior-mean variance.
    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(m) * in.ds.records.size());
    for (const auto& row : sel.frailty)
      pooled.insert(pooled.end(), row.begin(), row.end());
    std::sort(pooled.begin(), pooled.end());
    double mean_var = 0.0;
    for (int s = 0; s < m; ++s)
      mean_var += std::exp(
          in.fit.draws.value(sel.idx[s], in.fit.layout.log_frailty_var()));
    mean_var /= m;
    const double x_max = quantile_sorted(pooled, 0.995);
    const int n_grid = 200;
    std::vector<double> xs(n_grid);
    for (int i = 0; i < n_grid; ++i)
      xs[i] = x_max * static_cast<double>(i + 1) / n_grid;
    const std::vector<double> dens = gaussian_kde(pooled, xs);
    std::vector<std::string> fd_header = {"x", "density", "prior_density"};
    std::vector<std::vector<std::string>> fd_rows;
    for (int i = 0; i < n_grid; ++i)
      fd_rows.push_back(
          {format_double(xs[i]), format_double(dens[i]),
           format_double(std::exp(
               gamma_logpdf(1.0 / mean_var, 1.0 / mean_var, xs[i])))});
    write_csv(join_path(args.out_dir, "frailty_density.csv"), fd_header,
              fd_rows);

    // Covariate-profile predictions at the three frailty levels.
    std::vector<double> x_new = args.profile_x;
    if (x_new.empty()) x_new.assign(in.fit.layout.p, 0.0);
    if (static_cast<int>(x_new.size()) != in.fit.layout.p)
      throw ConfigError("profile covariate vector must have " +
                        std::to_string(in.fit.layout.p) + " entries");
    std::vector<std::string> pr_header = {"frailty_level", "t",  "p_aa",
                                          "p_tk",          "p_ck", "p_dd",
                                          "tv",            "rm",  "n_draws"};
    std::vector<std::vector<std::string>> pr_rows;
    static const std::pair<FrailtyLevel, const char*> levels[] = {
        {FrailtyLevel::P10, "p10"},
        {FrailtyLevel::Average, "average"},
        {FrailtyLevel::P90, "p90"}};
    for (const auto& [level, label] : levels) {
      const auto profile =
          profile_prediction(x_new, level, in.fit.draws, in.fit.layout,
                             in.grid, args.profile_reps, args.seed,
                             args.n_threads);
      for (const auto& rowv : profile)
        pr_rows.push_back({label, format_double(rowv.t),
                           format_double(rowv.state_prob[0]),
                           format_double(rowv.state_prob[1]),
                           format_double(rowv.state_prob[2]),
                           format_double(rowv.state_prob[3]),
                           format_double(rowv.tv), format_double(rowv.rm),
                           std::to_string(rowv.n_draws_with_cohort)});
    }
    write_csv(join_path(args.out_dir, "profiles.csv"), pr_header, pr_rows);

    double max_rhat = 0.0, min_ess = 0.0;
    json params_json =
        summarize_parameters(in.fit.draws, in.fit.layout,
                             in.fit.covariate_names, &max_rhat, &min_ess);
    int total_div = 0;
    for (std::uint8_t d : in.fit.draws.divergent) total_div += d;
    json report = {
        {"n_subjects", in.ds.records.size()},
        {"n_draws_used", m},
        {"grid", in.grid.times},
        {"parameters", params_json},
        {"diagnostics",
         {{"max_rhat", max_rhat},
          {"min_ess", min_ess},
          {"total_divergent", total_div}}},
        {"posterior_mean_frailty_var", mean_var},
        {"files",
         {"survival_curves.csv", "qm_curves.csv", "frailty_density.csv",
          "profiles.csv"}}};
    write_json_file(join_path(args.out_dir, "report.json"), report);

    json echo = {{"command", "report"},
                 {"data", args.data},
                 {"fit_dir", args.fit_dir},
                 {"out_dir", args.out_dir},
                 {"seed", args.seed},
                 {"grid", grid_to_json(args.grid)},
                 {"grid_resolved", in.grid.times},
                 {"max_draws", args.max_draws},
                 {"profile_reps", args.profile_reps},
                 {"profile_x", x_new}};
    write_json_file(join_path(args.out_dir, "report_config.json"), echo);

    std::cout << "report: wrote report.json and plot tables to "
              << args.out_dir << " (" << m << " draws, "
              << K << " grid times)\n";
  });
}

}  // namespace screff
