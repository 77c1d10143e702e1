// survode: parametric survival regression with ODE-defined hazards.
//
// Subcommands: simulate, fit, mcmc, select, predict, compare. Each takes a
// JSON config plus CSV data and writes deterministic artifacts (config hash,
// seed and version embedded; no timestamps) into the output directory.
// Exit codes: 0 ok, 2 validation error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <omp.h>

#include "survode/data.hpp"
#include "survode/diagnostics.hpp"
#include "survode/inference.hpp"
#include "survode/math.hpp"
#include "survode/simulate.hpp"
#include "survode/varselect.hpp"
#include "survode/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace survode;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Context {
  json config;
  std::string config_hash;
  SurvivalDataset data;
  bool has_data = false;
  fs::path out_dir;
  std::uint64_t seed = 0;
};

std::map<std::string, std::string> metadata(const Context& ctx) {
  return {{"config_hash", ctx.config_hash},
          {"seed", std::to_string(ctx.seed)},
          {"version", kVersion}};
}

json require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key))
    throw ValidationError("config: missing '" + key + "' in " + where);
  return j.at(key);
}

std::uint64_t require_seed(const json& j, const std::string& where) {
  // Seeds are never defaulted silently.
  if (!j.contains("seed"))
    throw ValidationError("config: '" + where + "' needs an explicit seed");
  return j.at("seed").get<std::uint64_t>();
}

Link parse_link(const std::string& s) {
  if (s == "log") return Link::log;
  if (s == "identity") return Link::identity;
  throw ValidationError("config: unknown link '" + s + "'");
}

ModelSpec parse_model(const json& cfg, const SurvivalDataset& data) {
  const json m = require(cfg, "model", "config");
  ModelSpec spec;
  const std::string fam = require(m, "family", "model").get<std::string>();
  if (fam == "logistic")
    spec.family = Family::logistic;
  else if (fam == "hazard_response")
    spec.family = Family::hazard_response;
  else
    throw ValidationError("config: unknown family '" + fam + "'");

  const auto names = spec.param_names();
  const json formulas = require(m, "formulas", "model");
  spec.formulas.clear();
  spec.links.clear();
  for (const auto& pname : names) {
    std::vector<int> cols;
    if (formulas.contains(pname))
      for (const auto& cov : formulas.at(pname))
        cols.push_back(data.column_index(cov.get<std::string>()));
    spec.formulas.push_back(cols);
    std::string link = "log";
    if (m.contains("links") && m.at("links").contains(pname))
      link = m.at("links").at(pname).get<std::string>();
    spec.links.push_back(parse_link(link));
  }

  if (m.contains("h0")) spec.h0 = m.at("h0").get<double>();
  if (m.contains("q0")) spec.q0 = m.at("q0").get<double>();
  const std::string mode = m.value("h0_mode", "fixed");
  if (mode == "fixed")
    spec.h0_mode = H0Mode::fixed;
  else if (mode == "free")
    spec.h0_mode = H0Mode::free;
  else if (mode == "tied_to_kappa")
    spec.h0_mode = H0Mode::tied_to_kappa;
  else
    throw ValidationError("config: unknown h0_mode '" + mode + "'");
  spec.max_time = m.value("max_time", data.n() > 0 ? data.max_observed_time() : 1.0);
  spec.validate(data.p());
  for (double t : data.times)
    if (t > spec.max_time)
      throw ValidationError("observed time exceeds the declared max_time");
  return spec;
}

PriorSpec parse_priors(const json& cfg, const ModelSpec& spec, const SurvivalDataset& data) {
  PriorSpec priors;
  const int d = spec.n_ode_params();
  const json pj = cfg.value("priors", json::object());
  const double isd = pj.value("intercept_sd", 10.0);
  priors.intercept_sd = Eigen::VectorXd::Constant(d, isd);

  const std::string kind = pj.value("coef_prior", "normal");
  if (kind == "normal") {
    priors.coef_kind = PriorSpec::CoefKind::normal;
    priors.coef_sd = pj.value("coef_sd", isd);
  } else if (kind == "gprior") {
    Eigen::VectorXd div = Eigen::VectorXd::Ones(d);
    if (pj.contains("g_divisors")) {
      const auto names = spec.param_names();
      for (int k = 0; k < d; ++k)
        if (pj.at("g_divisors").contains(names[k]))
          div[k] = pj.at("g_divisors").at(names[k]).get<double>();
    }
    priors = PriorSpec::effective_sample_size(data, d, isd, div);
    if (pj.contains("g"))
      for (int k = 0; k < d; ++k) priors.g[k] = pj.at("g").at(k).get<double>();
  } else {
    throw ValidationError("config: unknown coef_prior '" + kind + "'");
  }
  if (pj.contains("h0_gamma")) {
    GammaPrior gp;
    gp.shape = pj.at("h0_gamma").at("shape").get<double>();
    gp.rate = pj.at("h0_gamma").at("rate").get<double>();
    priors.h0_prior = gp;
  } else if (spec.h0_free()) {
    priors.h0_prior = GammaPrior{2.0, 0.5};
  }
  priors.complexity_C = pj.value("complexity_C", 0.0);
  priors.validate(d);
  return priors;
}

ode::Options parse_solver(const json& cfg) {
  ode::Options opts;
  const json s = cfg.value("solver", json::object());
  opts.tol.rtol = s.value("rtol", 1e-8);
  opts.tol.atol = s.value("atol", 1e-10);
  opts.max_steps = s.value("max_steps", static_cast<std::int64_t>(100000));
  return opts;
}

OptimOptions parse_optim(const json& cfg) {
  OptimOptions opts;
  const json o = cfg.value("optimizer", json::object());
  opts.max_iter = o.value("max_iter", 500);
  opts.tol = o.value("tol", 1e-5);
  opts.restarts = o.value("restarts", 3);
  opts.nm_max_evals = o.value("nm_max_evals", 4000);
  return opts;
}

// Default init is the origin: the simplex warm start explores from there,
// which in practice escapes the inactive-response ridge of the
// hazard-response posterior better than data-calibrated intercepts do.
Eigen::VectorXd parse_init(const json& cfg, const ParamLayout& layout) {
  if (!cfg.contains("init")) return Eigen::VectorXd::Zero(layout.dim);
  const auto& arr = cfg.at("init");
  if (static_cast<int>(arr.size()) != layout.dim)
    throw ValidationError("config: init length does not match parameter count");
  Eigen::VectorXd init(layout.dim);
  for (int i = 0; i < layout.dim; ++i) init[i] = arr.at(i).get<double>();
  return init;
}

json fit_to_json(const FitResult& fit, const std::vector<std::string>& names,
                 const Context& ctx) {
  json out;
  out["parameter_names"] = names;
  out["map"] = std::vector<double>(fit.map.data(), fit.map.data() + fit.map.size());
  out["log_posterior"] = fit.log_post_at_map;
  out["log_likelihood"] = fit.log_lik_at_map;
  out["aic"] = fit.aic;
  out["bic"] = fit.bic;
  out["converged"] = fit.converged;
  out["hessian_repaired"] = fit.hessian_repaired;
  out["iterations"] = fit.iterations;
  out["grad_norm"] = fit.grad_norm;
  out["saturation_count"] = fit.saturation_count;
  if (std::isfinite(fit.log_evidence)) out["log_evidence"] = fit.log_evidence;
  json hess = json::array();
  for (int i = 0; i < fit.hessian.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < fit.hessian.cols(); ++j) row.push_back(fit.hessian(i, j));
    hess.push_back(row);
  }
  out["hessian"] = hess;
  out["quantile_convention"] = "type-7 linear interpolation";
  out["metadata"] = metadata(ctx);
  return out;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

void write_draws(const PosteriorSample& sample, const std::vector<std::string>& names,
                 const fs::path& path, const Context& ctx) {
  Table t;
  t.columns = names;
  t.rows.reserve(static_cast<std::size_t>(sample.draws.rows()));
  for (int i = 0; i < sample.draws.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(sample.draws.cols()));
    for (int j = 0; j < sample.draws.cols(); ++j) row[j] = sample.draws(i, j);
    t.rows.push_back(std::move(row));
  }
  write_table(t, path.string(), metadata(ctx));
}

InclusionMask mask_from_config(const json& cfg, const ModelSpec& spec,
                               const SurvivalDataset& data) {
  if (cfg.contains("mask")) return InclusionMask::parse(cfg.at("mask").get<std::string>());
  return spec.full_mask(data.p());
}

// --- commands ---------------------------------------------------------------

int cmd_simulate(Context& ctx) {
  const json sim = require(ctx.config, "simulate", "config");
  ctx.seed = require_seed(sim, "simulate");
  const int n = require(sim, "n", "simulate").get<int>();
  const double grid_step = sim.value("grid_step", 0.01);
  const double t_max = sim.value("t_max", 20.0);

  if (sim.value("scenario", "") == "hazard_response_4cov") {
    const double target = sim.value("target_censoring", 0.2);
    Scenario sc = generate_scenario(n, target, ctx.seed, grid_step, t_max);
    auto meta = metadata(ctx);
    meta["censoring_horizon_C"] = format_double(sc.C);
    meta["target_censoring"] = format_double(sc.target_censoring);
    meta["achieved_censoring"] = format_double(sc.achieved_censoring);
    write_csv(sc.data, (ctx.out_dir / "dataset.csv").string(), meta);
    return 0;
  }

  // General path: model + truth + covariates from an existing CSV.
  if (!ctx.has_data)
    throw ValidationError("simulate needs --data for covariate rows (or a scenario)");
  const ModelSpec spec = parse_model(ctx.config, ctx.data);
  const json truth_j = require(sim, "truth", "simulate");
  Eigen::VectorXd truth(truth_j.size());
  for (std::size_t i = 0; i < truth_j.size(); ++i) truth[i] = truth_j.at(i).get<double>();
  if (truth.size() != ParamLayout::make_full(spec).dim)
    throw ValidationError("simulate: truth length does not match the model");

  const SimulatedTimes sim_times =
      simulate_times(spec, truth, ctx.data.covariates, t_max, grid_step, ctx.seed,
                     parse_solver(ctx.config));
  const double C = sim.value("censoring_C", t_max);
  SurvivalDataset out = ctx.data;
  apply_censoring(sim_times.times, C, &out.times, &out.status);
  auto meta = metadata(ctx);
  meta["censoring_horizon_C"] = format_double(C);
  write_csv(out, (ctx.out_dir / "dataset.csv").string(), meta);
  return 0;
}

int cmd_fit(Context& ctx) {
  const ModelSpec spec = parse_model(ctx.config, ctx.data);
  const PriorSpec priors = parse_priors(ctx.config, spec, ctx.data);
  const InclusionMask mask = mask_from_config(ctx.config, spec, ctx.data);
  const json fj = ctx.config.value("fit", json::object());
  ctx.seed = require_seed(fj, "fit");

  PosteriorModel model(ctx.data, spec, mask, priors, parse_solver(ctx.config));
  const Eigen::VectorXd init = parse_init(fj, model.layout());
  FitResult fit = find_map(model, init, parse_optim(ctx.config));
  fit.log_evidence = laplace_log_evidence(fit);

  const auto names = model.layout().names(spec, ctx.data.column_names);
  write_json(fit_to_json(fit, names, ctx), ctx.out_dir / "fit.json");

  const int n_draws = fj.value("normal_draws", 1000);
  const PosteriorSample sample = sample_normal_approx(fit, n_draws, ctx.seed);
  write_draws(sample, names, ctx.out_dir / "normal_draws.csv", ctx);
  return 0;
}

int cmd_mcmc(Context& ctx) {
  const ModelSpec spec = parse_model(ctx.config, ctx.data);
  const PriorSpec priors = parse_priors(ctx.config, spec, ctx.data);
  const InclusionMask mask = mask_from_config(ctx.config, spec, ctx.data);
  const json mj = require(ctx.config, "mcmc", "config");
  ctx.seed = require_seed(mj, "mcmc");

  McmcOptions mopts;
  mopts.n_iter = require(mj, "iterations", "mcmc").get<std::int64_t>();
  mopts.burn_in = mj.value("burn_in", mopts.n_iter / 10);
  mopts.thin = mj.value("thin", 1);
  mopts.seed = ctx.seed;

  PosteriorModel model(ctx.data, spec, mask, priors, parse_solver(ctx.config));
  Eigen::VectorXd init = parse_init(mj, model.layout());
  if (mj.value("init_at_map", true)) {
    const FitResult fit = find_map(model, init, parse_optim(ctx.config));
    init = fit.map;
    Eigen::LLT<Eigen::MatrixXd> llt(fit.hessian);
    if (llt.info() == Eigen::Success)
      mopts.init_cov = llt.solve(Eigen::MatrixXd::Identity(init.size(), init.size()));
  }
  const PosteriorSample sample = adaptive_metropolis(model, init, mopts);

  const auto names = model.layout().names(spec, ctx.data.column_names);
  write_draws(sample, names, ctx.out_dir / "mcmc_draws.csv", ctx);

  const auto ci = credible_intervals(sample, 0.95);
  json diag;
  diag["acceptance_rate"] = sample.acceptance_rate;
  diag["n_draws"] = sample.draws.rows();
  diag["burn_in"] = sample.burn_in;
  diag["thin"] = sample.thin;
  json intervals = json::object();
  for (std::size_t j = 0; j < ci.size(); ++j)
    intervals[names[j]] = {ci[j].first, ci[j].second};
  diag["credible_95"] = intervals;
  diag["metadata"] = metadata(ctx);
  write_json(diag, ctx.out_dir / "mcmc_diagnostics.json");
  return 0;
}

int cmd_select(Context& ctx) {
  const ModelSpec spec = parse_model(ctx.config, ctx.data);
  const PriorSpec priors = parse_priors(ctx.config, spec, ctx.data);
  const json sj = require(ctx.config, "select", "config");
  ctx.seed = require_seed(sj, "select");

  SelectOptions opts;
  opts.n_iter = sj.value("iterations", 1100);
  opts.burn_in = sj.value("burn_in", 100);
  opts.seed = ctx.seed;
  opts.optim = parse_optim(ctx.config);
  opts.optim.restarts = sj.value("restarts", 1);  // warm starts make restarts cheap to skip
  opts.solver = parse_solver(ctx.config);

  InclusionMask init = sj.contains("init_mask")
                           ? InclusionMask::parse(sj.at("init_mask").get<std::string>())
                           : spec.empty_mask(ctx.data.p());
  const SelectionResult res = gibbs_select(ctx.data, spec, priors, init, opts);
  const auto probs = model_posterior_probs(*res.cache, priors.complexity_C,
                                           spec.candidate_count());

  Table models;
  models.columns = {"visits", "log_evidence", "posterior_prob"};
  json mask_col = json::array();
  {
    std::ofstream out(ctx.out_dir / "models.csv");
    for (const auto& [k, v] : metadata(ctx)) out << "# " << k << "=" << v << "\n";
    out << "mask,visits,log_evidence,posterior_prob\n";
    const auto cached = res.cache->snapshot();
    for (const auto& [key, entry] : cached) {
      const auto vit = res.visit_counts.find(key);
      out << key << "," << (vit == res.visit_counts.end() ? 0 : vit->second) << ","
          << format_double(entry.log_evidence) << "," << format_double(probs.at(key)) << "\n";
    }
  }

  {
    std::ofstream out(ctx.out_dir / "inclusion.csv");
    for (const auto& [k, v] : metadata(ctx)) out << "# " << k << "=" << v << "\n";
    out << "parameter,covariate,probability\n";
    const auto pnames = spec.param_names();
    for (int k = 0; k < spec.n_ode_params(); ++k)
      for (int col : spec.formulas[k])
        out << pnames[k] << "," << ctx.data.column_names[col] << ","
            << format_double(res.inclusion_probs(k, col)) << "\n";
  }

  json median;
  median["mask"] = res.median.key();
  median["active_count"] = res.median.active_count();
  median["failed_masks"] = res.failed_masks;
  median["visited_models"] = res.cache->size();
  median["metadata"] = metadata(ctx);
  write_json(median, ctx.out_dir / "median_model.json");
  return 0;
}

int cmd_predict(Context& ctx) {
  const ModelSpec spec = parse_model(ctx.config, ctx.data);
  const InclusionMask mask = mask_from_config(ctx.config, spec, ctx.data);
  const json pj = require(ctx.config, "predict", "config");
  ctx.seed = require_seed(pj, "predict");

  const std::string draws_path = require(pj, "draws", "predict").get<std::string>();
  const Table draws_table = read_table(draws_path);
  PosteriorSample posterior;
  posterior.draws.resize(static_cast<Eigen::Index>(draws_table.rows.size()),
                         static_cast<Eigen::Index>(draws_table.columns.size()));
  for (std::size_t i = 0; i < draws_table.rows.size(); ++i)
    for (std::size_t j = 0; j < draws_table.columns.size(); ++j)
      posterior.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          draws_table.rows[i][j];

  const double t_end = pj.value("t_max", spec.max_time);
  const int n_grid = pj.value("grid_points", 200);
  std::vector<double> grid(n_grid);
  for (int g = 0; g < n_grid; ++g)
    grid[g] = t_end * static_cast<double>(g) / static_cast<double>(n_grid - 1);

  const json profiles = require(pj, "profiles", "predict");
  json attractors = json::array();
  int idx = 0;
  for (const auto& prof : profiles) {
    Eigen::VectorXd x(ctx.data.p());
    for (int j = 0; j < ctx.data.p(); ++j)
      x[j] = prof.at(ctx.data.column_names[j]).get<double>();
    const PredictiveCurves curves =
        predictive_curves(spec, mask, posterior, x, grid, parse_solver(ctx.config));

    Table t;
    t.columns = {"time", "mean", "lo95", "hi95"};
    std::ofstream out(ctx.out_dir / ("curves_profile" + std::to_string(idx) + ".csv"));
    for (const auto& [k, v] : metadata(ctx)) out << "# " << k << "=" << v << "\n";
    out << "time,mean,lo95,hi95,quantity\n";
    auto emit = [&](const CurveBand& band, const char* quantity) {
      for (std::size_t g = 0; g < grid.size(); ++g)
        out << format_double(grid[g]) << "," << format_double(band.mean[g]) << ","
            << format_double(band.lo95[g]) << "," << format_double(band.hi95[g]) << ","
            << quantity << "\n";
    };
    emit(curves.hazard, "hazard");
    if (curves.has_response) emit(curves.response, "response");
    emit(curves.survival, "survival");

    json a;
    a["profile"] = idx;
    a["pr_hazard_loses"] = curves.pr_hazard_loses;
    a["pr_response_loses"] = curves.pr_response_loses;
    a["pr_coexist"] = curves.pr_coexist;
    a["failed_draws"] = curves.failed_draws;
    attractors.push_back(a);
    ++idx;
  }
  json out;
  out["profiles"] = attractors;
  out["metadata"] = metadata(ctx);
  write_json(out, ctx.out_dir / "attractors.json");
  return 0;
}

int cmd_compare(Context& ctx) {
  const json cj = require(ctx.config, "compare", "config");
  ctx.seed = 0;
  std::ofstream out(ctx.out_dir / "compare.csv");
  for (const auto& [k, v] : metadata(ctx)) out << "# " << k << "=" << v << "\n";
  out << "label,parameters,log_likelihood,aic,bic\n";
  for (const auto& entry : require(cj, "fits", "compare")) {
    const std::string label = require(entry, "label", "compare.fits").get<std::string>();
    const std::string path = require(entry, "path", "compare.fits").get<std::string>();
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open fit document '" + path + "'");
    json fit;
    in >> fit;
    out << label << "," << fit.at("map").size() << ","
        << format_double(fit.at("log_likelihood").get<double>()) << ","
        << format_double(fit.at("aic").get<double>()) << ","
        << format_double(fit.at("bic").get<double>()) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival regression with ODE-defined hazard functions"};
  app.set_version_flag("--version", kVersion);

  std::string config_path, data_path, out_dir = ".";
  int threads = 0;

  app.add_option("--config", config_path, "JSON configuration file")
      ->envname("SURVODE_CONFIG");
  app.add_option("--data", data_path, "input dataset CSV")->envname("SURVODE_DATA");
  app.add_option("--out", out_dir, "output directory")->envname("SURVODE_OUT");
  app.add_option("--threads", threads, "worker threads (0 = library default)")
      ->envname("SURVODE_THREADS");

  app.require_subcommand(1);
  auto* c_sim = app.add_subcommand("simulate", "generate a dataset from a model truth");
  auto* c_fit = app.add_subcommand("fit", "MAP fit, Laplace evidence, normal-approx draws");
  auto* c_mcmc = app.add_subcommand("mcmc", "adaptive Metropolis posterior sample");
  auto* c_sel = app.add_subcommand("select", "Gibbs variable selection");
  auto* c_pred = app.add_subcommand("predict", "posterior predictive curves");
  auto* c_cmp = app.add_subcommand("compare", "AIC/BIC table across fitted models");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads > 0) omp_set_num_threads(threads);

    Context ctx;
    if (config_path.empty()) throw ValidationError("--config is required");
    std::ifstream cfg_in(config_path);
    if (!cfg_in) throw ValidationError("cannot open config '" + config_path + "'");
    cfg_in >> ctx.config;
    ctx.config_hash = hex64(fnv1a(ctx.config.dump()));
    ctx.out_dir = out_dir;
    fs::create_directories(ctx.out_dir);

    if (!data_path.empty()) {
      ctx.data = ingest_csv(data_path);
      ctx.has_data = true;
    }
    auto need_data = [&]() {
      if (!ctx.has_data) throw ValidationError("--data is required for this command");
    };

    if (c_sim->parsed()) return cmd_simulate(ctx);
    if (c_fit->parsed()) { need_data(); return cmd_fit(ctx); }
    if (c_mcmc->parsed()) { need_data(); return cmd_mcmc(ctx); }
    if (c_sel->parsed()) { need_data(); return cmd_select(ctx); }
    if (c_pred->parsed()) { need_data(); return cmd_predict(ctx); }
    if (c_cmp->parsed()) return cmd_compare(ctx);
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << R"({"error":{"kind":"validation","message":")" << e.what() << R"("}})"
              << std::endl;
    return 2;
  } catch (const NumericError& e) {
    std::cerr << R"({"error":{"kind":"numeric","message":")" << e.what() << R"("}})"
              << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << R"({"error":{"kind":"validation","message":")" << e.what() << R"("}})"
              << std::endl;
    return 2;
  }
}
