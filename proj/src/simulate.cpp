#include "survode/simulate.hpp"

#include <cmath>

#include "survode/math.hpp"

namespace survode {

InvertedTime invert_cumhaz(const std::vector<double>& grid_times,
                           const std::vector<double>& grid_cumhaz, double target) {
  if (grid_times.size() != grid_cumhaz.size() || grid_times.empty())
    throw ValidationError("cumulative-hazard grid is empty or ragged");
  if (target < 0.0) throw ValidationError("inverse cumulative hazard needs target >= 0");
  for (std::size_t i = 1; i < grid_cumhaz.size(); ++i)
    if (grid_cumhaz[i] < grid_cumhaz[i - 1] - 1e-12)
      throw ValidationError("non-monotone cumulative hazard on the simulation grid");

  if (target > grid_cumhaz.back()) return {grid_times.back(), true};
  if (target <= grid_cumhaz.front()) return {grid_times.front(), false};
  // First knot with H >= target; interpolate within the bracketing cell.
  const auto it = std::lower_bound(grid_cumhaz.begin(), grid_cumhaz.end(), target);
  const std::size_t hi = static_cast<std::size_t>(it - grid_cumhaz.begin());
  const std::size_t lo = hi - 1;
  const double dH = grid_cumhaz[hi] - grid_cumhaz[lo];
  if (dH <= 0.0) return {grid_times[lo], false};
  const double w = (target - grid_cumhaz[lo]) / dH;
  return {grid_times[lo] + w * (grid_times[hi] - grid_times[lo]), false};
}

InvertedTime invert_cumhaz(const ode::Trajectory& traj, double target, double grid_step) {
  const double t_max = traj.t_end();
  std::vector<double> ts, Hs;
  for (double t = 0.0; t < t_max; t += grid_step) {
    ts.push_back(t);
    Hs.push_back(traj.cumhaz_at(t));
  }
  ts.push_back(t_max);
  Hs.push_back(traj.cumhaz_at(t_max));
  return invert_cumhaz(ts, Hs, target);
}

namespace {

// Tabulates H on the row's grid; closed form for the logistic family, one
// dense ODE solve for hazard-response.
bool tabulate_cumhaz(const ModelSpec& spec, const ParamLayout& layout,
                     const Eigen::VectorXd& eta, const double* x, int p, double t_max,
                     double grid_step, const ode::Options& solver, std::vector<double>& ts,
                     std::vector<double>& Hs) {
  ts.clear();
  Hs.clear();
  for (double t = 0.0; t < t_max; t += grid_step) ts.push_back(t);
  ts.push_back(t_max);
  if (spec.family == Family::logistic) {
    LogisticParams lp;
    if (!try_logistic_params(spec, layout, eta, x, p, &lp) || !lp.valid()) return false;
    Hs.reserve(ts.size());
    for (double t : ts) Hs.push_back(logistic_cumhaz(t, lp));
    return true;
  }
  HazardResponseParams hp;
  if (!try_hazard_response_params(spec, layout, eta, x, p, &hp) || !hp.valid()) return false;
  const ode::IntegrateResult res =
      ode::integrate(make_hazard_response_system(hp), {hp.h0, hp.q0, 0.0}, t_max, solver);
  if (!res.ok()) return false;
  Hs.reserve(ts.size());
  for (double t : ts) Hs.push_back(res.trajectory.cumhaz_at(t));
  return true;
}

}  // namespace

SimulatedTimes simulate_times(const ModelSpec& spec, const Eigen::VectorXd& eta_true,
                              const Eigen::MatrixXd& covariate_rows, double t_max,
                              double grid_step, std::uint64_t seed,
                              const ode::Options& solver) {
  if (!(grid_step > 0.0) || !(t_max > 0.0))
    throw std::invalid_argument("simulate_times needs positive grid_step and t_max");
  const int n = static_cast<int>(covariate_rows.rows());
  const int p = static_cast<int>(covariate_rows.cols());
  const ParamLayout layout = ParamLayout::make_full(spec);

  SimulatedTimes out;
  out.times.assign(n, 0.0);
  out.at_horizon.assign(n, 0);
  // 0 ok, 1 solve failure, 2 bad cumulative hazard; checked after the loop
  // because throwing inside the parallel region is not an option.
  std::vector<int> failed_row(n, 0);

#pragma omp parallel
  {
    std::vector<double> ts, Hs;
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
      Eigen::RowVectorXd row = covariate_rows.row(i);
      if (!tabulate_cumhaz(spec, layout, eta_true, row.data(), p, t_max, grid_step, solver,
                           ts, Hs)) {
        failed_row[i] = 1;
        continue;
      }
      auto rng = make_engine(seed, static_cast<std::uint64_t>(i));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const double u = unif(rng);
      try {
        const InvertedTime inv = invert_cumhaz(ts, Hs, -std::log(u));
        out.times[i] = inv.t;
        out.at_horizon[i] = inv.at_horizon ? 1 : 0;
      } catch (const ValidationError&) {
        failed_row[i] = 2;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (failed_row[i] == 1)
      throw NumericError("ODE solve failed for simulated row " + std::to_string(i + 1));
    if (failed_row[i] == 2)
      throw ValidationError("non-monotone cumulative hazard for simulated row " +
                            std::to_string(i + 1));
  }
  return out;
}

void apply_censoring(const std::vector<double>& times, double C,
                     std::vector<double>* observed, std::vector<int>* status) {
  if (!(C > 0.0)) throw std::invalid_argument("censoring horizon must be positive");
  observed->resize(times.size());
  status->resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    (*observed)[i] = std::min(times[i], C);
    (*status)[i] = times[i] <= C ? 1 : 0;
  }
}

ModelSpec scenario_spec() {
  ModelSpec spec;
  spec.family = Family::hazard_response;
  spec.links = {Link::log, Link::log, Link::log, Link::log};
  spec.formulas = {{0}, {1}, {2}, {3}};
  spec.h0 = 0.01;
  spec.q0 = 1e-6;
  spec.h0_mode = H0Mode::fixed;
  spec.max_time = 20.0;
  return spec;
}

Eigen::VectorXd scenario_truth() {
  Eigen::VectorXd beta(8);
  beta << 1.5, 0.5, 0.5, -0.5, 1.0, 0.5, 3.0, -0.5;
  return beta;
}

Scenario generate_scenario(int n, double target_censoring, std::uint64_t seed,
                           double grid_step, double t_max) {
  if (n < 1) throw std::invalid_argument("scenario needs n >= 1");
  if (!(target_censoring >= 0.0 && target_censoring < 1.0))
    throw std::invalid_argument("target censoring rate must be in [0,1)");

  const ModelSpec spec = scenario_spec();
  const Eigen::VectorXd truth = scenario_truth();

  Eigen::MatrixXd X(n, 4);
  auto rng = make_engine(seed, 0xc0de);
  std::bernoulli_distribution bern(0.5);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = bern(rng) ? 1.0 : 0.0;
    X(i, 1) = bern(rng) ? 1.0 : 0.0;
    X(i, 2) = norm(rng);
    X(i, 3) = norm(rng);
  }

  const SimulatedTimes sim =
      simulate_times(spec, truth, X, t_max, grid_step, splitmix64(seed ^ 0x71e5));

  // Pick C as the (1 - rate) empirical quantile of the raw times; capped
  // rows carry time t_max, so C stays strictly below the horizon to keep
  // them censored.
  double C;
  if (target_censoring == 0.0) {
    C = t_max;
  } else {
    C = quantile_type7(sim.times, 1.0 - target_censoring);
    C = std::min(C, std::nexttoward(t_max, 0.0L));
  }

  Scenario out;
  out.seed = seed;
  out.C = C;
  out.target_censoring = target_censoring;
  std::vector<double> observed;
  std::vector<int> status;
  apply_censoring(sim.times, C, &observed, &status);
  out.data.times = std::move(observed);
  out.data.status = std::move(status);
  out.data.covariates = std::move(X);
  out.data.column_names = {"x1", "x2", "x3", "x4"};
  out.achieved_censoring =
      static_cast<double>(out.data.n() - out.data.events()) / std::max(1, n);
  out.data.validate();
  return out;
}

}  // namespace survode
