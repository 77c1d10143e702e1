#include "survode/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survode/math.hpp"

namespace survode {

namespace {

double kde(const std::vector<double>& sample, double bw, double x) {
  double s = 0.0;
  const double inv = 1.0 / bw;
  for (double xi : sample) {
    const double z = (x - xi) * inv;
    s += std::exp(-0.5 * z * z);
  }
  return s * inv * 0.3989422804014327 / static_cast<double>(sample.size());
}

}  // namespace

double tv_distance(const std::vector<double>& sample_a, const std::vector<double>& sample_b,
                   double bandwidth_override) {
  if (sample_a.size() < 30 || sample_b.size() < 30)
    throw std::invalid_argument("tv_distance needs samples of size >= 30");
  const double bw_a = bandwidth_override > 0.0 ? bandwidth_override : silverman_bandwidth(sample_a);
  const double bw_b = bandwidth_override > 0.0 ? bandwidth_override : silverman_bandwidth(sample_b);
  const auto [amin, amax] = std::minmax_element(sample_a.begin(), sample_a.end());
  const auto [bmin, bmax] = std::minmax_element(sample_b.begin(), sample_b.end());
  const double lo = std::min(*amin - 5.0 * bw_a, *bmin - 5.0 * bw_b);
  const double hi = std::max(*amax + 5.0 * bw_a, *bmax + 5.0 * bw_b);
  const double l1 = gauss_kronrod(
      [&](double x) { return std::abs(kde(sample_a, bw_a, x) - kde(sample_b, bw_b, x)); },
      lo, hi, 1e-6, 1e-6);
  return std::clamp(0.5 * l1, 0.0, 1.0);
}

double l1_hazard_distance(const std::function<double(double)>& h_a,
                          const std::function<double(double)>& h_b, double t_star,
                          double quad_step) {
  if (!(t_star > 0.0)) throw std::invalid_argument("l1_hazard_distance needs t_star > 0");
  const double step = quad_step > 0.0 ? quad_step : 1e-3 * t_star;
  const auto f = [&](double t) { return std::abs(h_a(t) - h_b(t)); };
  const std::int64_t cells = std::max<std::int64_t>(1, std::llround(t_star / step));
  const double h = t_star / static_cast<double>(cells);
  double sum = 0.5 * (f(0.0) + f(t_star));
  for (std::int64_t i = 1; i < cells; ++i) sum += f(h * static_cast<double>(i));
  return sum * h;
}

double KMCurve::at(double t) const {
  double s = 1.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] <= t)
      s = survival[i];
    else
      break;
  }
  return s;
}

KMCurve kaplan_meier(const std::vector<double>& times, const std::vector<int>& status) {
  const std::size_t n = times.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (times[a] != times[b]) return times[a] < times[b];
    return status[a] > status[b];  // events before censorings at tied times
  });
  KMCurve curve;
  double S = 1.0;
  double at_risk = static_cast<double>(n);
  std::size_t k = 0;
  while (k < n) {
    const double t = times[idx[k]];
    int d = 0, c = 0;
    while (k < n && times[idx[k]] == t) {
      if (status[idx[k]]) ++d;
      else ++c;
      ++k;
    }
    if (d > 0) {
      S *= 1.0 - static_cast<double>(d) / at_risk;
      curve.times.push_back(t);
      curve.survival.push_back(S);
    }
    at_risk -= static_cast<double>(d + c);
  }
  return curve;
}

std::vector<std::pair<double, KMCurve>> kaplan_meier(const SurvivalDataset& data,
                                                     int group_column) {
  std::vector<double> values;
  for (int i = 0; i < data.n(); ++i) {
    const double v = data.covariates(i, group_column);
    if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
  }
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, KMCurve>> out;
  for (double v : values) {
    std::vector<double> t;
    std::vector<int> s;
    for (int i = 0; i < data.n(); ++i) {
      if (data.covariates(i, group_column) == v) {
        t.push_back(data.times[i]);
        s.push_back(data.status[i]);
      }
    }
    out.emplace_back(v, kaplan_meier(t, s));
  }
  return out;
}

namespace {

CurveBand summarize(const std::vector<std::vector<double>>& per_draw, std::size_t grid_size) {
  CurveBand band;
  band.mean.resize(grid_size);
  band.lo95.resize(grid_size);
  band.hi95.resize(grid_size);
  std::vector<double> col(per_draw.size());
  for (std::size_t g = 0; g < grid_size; ++g) {
    for (std::size_t i = 0; i < per_draw.size(); ++i) col[i] = per_draw[i][g];
    band.mean[g] = sample_mean(col);
    band.lo95[g] = quantile_type7(col, 0.025);
    band.hi95[g] = quantile_type7(col, 0.975);
  }
  return band;
}

}  // namespace

PredictiveCurves predictive_curves(const ModelSpec& spec, const InclusionMask& mask,
                                   const PosteriorSample& posterior,
                                   const Eigen::VectorXd& x_profile,
                                   const std::vector<double>& time_grid,
                                   const ode::Options& solver) {
  if (time_grid.empty()) throw std::invalid_argument("empty time grid");
  for (double t : time_grid)
    if (t < 0.0 || t > spec.max_time)
      throw std::invalid_argument("prediction grid outside [0, max_time]");

  const ParamLayout layout = ParamLayout::make(spec, mask);
  const int n_draws = static_cast<int>(posterior.draws.rows());
  const int p = static_cast<int>(x_profile.size());
  const std::size_t G = time_grid.size();
  const double t_end = *std::max_element(time_grid.begin(), time_grid.end());

  PredictiveCurves out;
  out.grid = time_grid;
  out.has_response = spec.family == Family::hazard_response;

  std::vector<std::vector<double>> hs(n_draws), qs(n_draws), Ss(n_draws);
  std::vector<int> ok(n_draws, 0);
  int n_h_neg = 0, n_q_neg = 0, n_coexist = 0;

#pragma omp parallel for schedule(dynamic, 8) reduction(+ : n_h_neg, n_q_neg, n_coexist)
  for (int i = 0; i < n_draws; ++i) {
    const Eigen::VectorXd eta = posterior.draws.row(i).transpose();
    std::vector<double> h(G), q(G), S(G);
    if (spec.family == Family::logistic) {
      LogisticParams lp;
      if (!try_logistic_params(spec, layout, eta, x_profile.data(), p, &lp) || !lp.valid())
        continue;
      for (std::size_t g = 0; g < G; ++g) {
        h[g] = logistic_hazard(time_grid[g], lp);
        S[g] = std::exp(-logistic_cumhaz(time_grid[g], lp));
      }
    } else {
      HazardResponseParams hp;
      if (!try_hazard_response_params(spec, layout, eta, x_profile.data(), p, &hp) ||
          !hp.valid())
        continue;
      const auto res = ode::integrate(make_hazard_response_system(hp),
                                      {hp.h0, hp.q0, 0.0}, t_end, solver);
      if (!res.ok()) continue;
      double buf[ode::kMaxDim];
      for (std::size_t g = 0; g < G; ++g) {
        res.trajectory.evaluate_at(time_grid[g], buf);
        h[g] = buf[0];
        q[g] = buf[1];
        S[g] = std::exp(-buf[2]);
      }
      const Attractor a = classify_attractor(hp);
      if (a.kind == AttractorKind::response_wins) ++n_h_neg;
      else if (a.kind == AttractorKind::hazard_wins) ++n_q_neg;
      else if (a.kind == AttractorKind::coexistence) ++n_coexist;
    }
    hs[i] = std::move(h);
    qs[i] = std::move(q);
    Ss[i] = std::move(S);
    ok[i] = 1;
  }

  // Aggregation keeps the fixed draw order.
  std::vector<std::vector<double>> h_ok, q_ok, S_ok;
  for (int i = 0; i < n_draws; ++i) {
    if (!ok[i]) continue;
    h_ok.push_back(std::move(hs[i]));
    if (out.has_response) q_ok.push_back(std::move(qs[i]));
    S_ok.push_back(std::move(Ss[i]));
  }
  out.failed_draws = n_draws - static_cast<int>(h_ok.size());
  if (out.failed_draws > 0.01 * n_draws)
    throw NumericError("more than 1% of posterior draws failed to solve");
  if (h_ok.empty()) throw NumericError("no usable posterior draws");

  out.hazard = summarize(h_ok, G);
  out.survival = summarize(S_ok, G);
  if (out.has_response) {
    out.response = summarize(q_ok, G);
    const double m = static_cast<double>(h_ok.size());
    out.pr_hazard_loses = n_h_neg / m;
    out.pr_response_loses = n_q_neg / m;
    out.pr_coexist = n_coexist / m;
  }
  return out;
}

}  // namespace survode
