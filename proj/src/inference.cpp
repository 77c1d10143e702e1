#include "survode/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survode/math.hpp"

namespace survode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// eps^(1/4) steps for both difference orders: second differences divide by
// eps^2, and on the ODE-solver path the objective carries tolerance-level
// noise from step-sequence changes, which a larger step damps. Truncation
// stays negligible at the accuracies the fits need.
const double kFdStep = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
const double kFdStep2 = kFdStep;

double scaled_grad_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& x, double f) {
  double norm = 0.0;
  for (int i = 0; i < g.size(); ++i)
    norm = std::max(norm, std::abs(g[i]) * std::max(1.0, std::abs(x[i])));
  return norm / std::max(1.0, std::abs(f));
}

// Nelder-Mead on -f. Returns the best vertex.
struct NmResult {
  Eigen::VectorXd x;
  double fx;  // value of f (maximized)
};

NmResult nelder_mead(const Objective& f, const Eigen::VectorXd& init, int max_evals) {
  const int d = static_cast<int>(init.size());
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  std::vector<Eigen::VectorXd> verts;
  std::vector<double> vals;  // negated objective
  auto eval = [&](const Eigen::VectorXd& x) { return -f(x); };
  int evals = 0;

  verts.push_back(init);
  vals.push_back(eval(init));
  ++evals;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v = init;
    v[i] += (v[i] != 0.0) ? 0.05 * std::abs(v[i]) + 0.01 : 0.05;
    verts.push_back(v);
    vals.push_back(eval(v));
    ++evals;
  }

  std::vector<int> order(d + 1);
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = order[0], worst = order[d], second = order[d - 1];
    // warm start only: the quasi-Newton stage does the final polish
    if (std::isfinite(vals[best]) && std::isfinite(vals[worst]) &&
        vals[worst] - vals[best] < 1e-6 * (1.0 + std::abs(vals[best])))
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i <= d; ++i)
      if (i != worst) centroid += verts[i];
    centroid /= d;

    Eigen::VectorXd xr = centroid + alpha * (centroid - verts[worst]);
    const double fr = eval(xr);
    ++evals;
    if (fr < vals[order[0]]) {
      Eigen::VectorXd xe = centroid + gamma * (centroid - verts[worst]);
      const double fe = eval(xe);
      ++evals;
      if (fe < fr) {
        verts[worst] = xe;
        vals[worst] = fe;
      } else {
        verts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      verts[worst] = xr;
      vals[worst] = fr;
    } else {
      Eigen::VectorXd xc = centroid + rho * (verts[worst] - centroid);
      const double fc = eval(xc);
      ++evals;
      if (fc < vals[worst]) {
        verts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (int i = 0; i <= d; ++i) {
          if (i == best) continue;
          verts[i] = verts[best] + sigma * (verts[i] - verts[best]);
          vals[i] = eval(verts[i]);
          ++evals;
        }
      }
    }
  }
  const int best = static_cast<int>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {verts[best], -vals[best]};
}

// BFGS polish on -f with central-difference gradients and Armijo
// backtracking. Stops on the scaled gradient norm.
MaxResult bfgs(const Objective& f, const Eigen::VectorXd& init, const OptimOptions& opts) {
  const int d = static_cast<int>(init.size());
  MaxResult res;
  res.x = init;
  res.value = f(init);
  if (!std::isfinite(res.value)) return res;

  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd g = -numeric_gradient(f, res.x);
  int ls_failures = 0;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    res.iterations = iter;
    res.grad_norm = scaled_grad_norm(g, res.x, res.value);
    if (res.grad_norm < opts.tol) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd p = -Hinv * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {  // not a descent direction; reset
      Hinv.setIdentity();
      p = -g;
      slope = g.dot(p);
      if (!(slope < 0.0)) break;
    }
    double step = 1.0;
    double fnew = -kInf;
    Eigen::VectorXd xnew;
    bool found = false;
    for (int ls = 0; ls < 40; ++ls) {
      xnew = res.x + step * p;
      fnew = f(xnew);
      if (std::isfinite(fnew) && -fnew <= -res.value + 1e-4 * step * slope) {
        found = true;
        break;
      }
      step *= 0.5;
    }
    if (!found && ++ls_failures <= 2) {
      // accumulated curvature can point across a noisy cliff; retry along
      // the raw gradient before giving up
      Hinv.setIdentity();
      g = -numeric_gradient(f, res.x);
      continue;
    }
    if (!found) break;
    Eigen::VectorXd gnew = -numeric_gradient(f, xnew);
    const Eigen::VectorXd s = xnew - res.x;
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd Hy = Hinv * y;
      const double yHy = y.dot(Hy);
      Hinv += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
              (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
    res.x = xnew;
    res.value = fnew;
    g = gnew;
  }
  res.grad_norm = scaled_grad_norm(g, res.x, res.value);
  res.converged = res.grad_norm < opts.tol;
  return res;
}

}  // namespace

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd g(d);
  Eigen::VectorXd xp = x;
  for (int i = 0; i < d; ++i) {
    const double eps = kFdStep * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + eps;
    const double fp = f(xp);
    xp[i] = x[i] - eps;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * eps) : 0.0;
  }
  return g;
}

MaxResult maximize(const Objective& f, const Eigen::VectorXd& init, const OptimOptions& opts) {
  std::vector<Eigen::VectorXd> starts{init};
  auto rng = make_engine(0x5eed5eedULL);  // fixed: restarts are deterministic
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (int r = 1; r < std::max(1, opts.restarts); ++r) {
    Eigen::VectorXd s = init;
    for (int i = 0; i < s.size(); ++i) s[i] += jitter(rng);
    starts.push_back(s);
  }

  // Best converged result wins; a rough higher value from a stalled line
  // search must not shadow a clean optimum.
  MaxResult best;
  best.value = -kInf;
  for (const auto& start : starts) {
    const NmResult warm = nelder_mead(f, start, opts.nm_max_evals);
    if (!std::isfinite(warm.fx)) continue;
    MaxResult r = bfgs(f, warm.x, opts);
    if (!std::isfinite(r.value)) continue;
    const bool better = (r.converged && !best.converged) ||
                        (r.converged == best.converged && r.value > best.value);
    if (better) best = r;
  }
  if (!std::isfinite(best.value))
    throw NumericError("optimization failed: every restart ended in the -inf region");
  return best;
}

Eigen::MatrixXd numeric_hessian_neg(const Objective& f, const Eigen::VectorXd& x,
                                    double step_scale) {
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd eps(d);
  for (int i = 0; i < d; ++i)
    eps[i] = step_scale * kFdStep2 * std::max(1.0, std::abs(x[i]));
  const double f0 = f(x);
  auto checked = [&](const Eigen::VectorXd& xp) {
    const double v = f(xp);
    if (!std::isfinite(v))
      throw NumericError(
          "Hessian stencil hit the -inf region; shrink the step or move away "
          "from the boundary");
    return v;
  };
  if (!std::isfinite(f0))
    throw NumericError("Hessian requested at a point with -inf log-posterior");

  Eigen::MatrixXd H(d, d);
  Eigen::VectorXd xp = x;
  for (int i = 0; i < d; ++i) {
    xp[i] = x[i] + eps[i];
    const double fp = checked(xp);
    xp[i] = x[i] - eps[i];
    const double fm = checked(xp);
    xp[i] = x[i];
    H(i, i) = -(fp - 2.0 * f0 + fm) / (eps[i] * eps[i]);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      xp[i] = x[i] + eps[i];
      xp[j] = x[j] + eps[j];
      const double fpp = checked(xp);
      xp[j] = x[j] - eps[j];
      const double fpm = checked(xp);
      xp[i] = x[i] - eps[i];
      const double fmm = checked(xp);
      xp[j] = x[j] + eps[j];
      const double fmp = checked(xp);
      xp[i] = x[i];
      xp[j] = x[j];
      const double v = -(fpp - fpm - fmp + fmm) / (4.0 * eps[i] * eps[j]);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return 0.5 * (H + H.transpose());
}

double laplace_log_evidence(double log_post_at_max, const Eigen::MatrixXd& hess_neg) {
  const int d = static_cast<int>(hess_neg.rows());
  if (d == 0) return log_post_at_max;
  Eigen::LLT<Eigen::MatrixXd> llt(hess_neg);
  if (llt.info() != Eigen::Success)
    throw NumericError("non-positive-definite Hessian: model unidentifiable at the MAP");
  double log_det = 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(L(i, i));
  return log_post_at_max + 0.5 * d * std::log(2.0 * M_PI) - 0.5 * log_det;
}

FitResult find_map(const PosteriorModel& model, const Eigen::VectorXd& init,
                   const OptimOptions& opts) {
  const MaxResult r = maximize([&model](const Eigen::VectorXd& e) { return model(e); },
                               init, opts);
  FitResult fit;
  fit.map = r.x;
  fit.log_post_at_map = r.value;
  fit.converged = r.converged;
  fit.iterations = r.iterations;
  fit.grad_norm = r.grad_norm;
  fit.log_lik_at_map = model.loglik(r.x);
  fit.hessian = hessian_at(model, r.x, &fit.hessian_repaired);
  const auto ic = information_criteria(fit.log_lik_at_map,
                                       static_cast<int>(r.x.size()), model.data().n());
  fit.aic = ic.aic;
  fit.bic = ic.bic;
  // Count link saturations at the MAP for the fit diagnostics.
  const auto& data = model.data();
  const auto& layout = model.layout();
  for (int i = 0; i < data.n(); ++i) {
    Eigen::RowVectorXd row = data.covariates.row(i);
    PredictorValues v;
    if (try_eval_predictors(model.spec(), layout, fit.map, row.data(), data.p(), &v) &&
        v.saturated)
      ++fit.saturation_count;
  }
  return fit;
}

Eigen::MatrixXd hessian_at(const PosteriorModel& model, const Eigen::VectorXd& eta,
                           bool* repaired) {
  // The posterior can have a sharp shoulder right at the optimum (an event
  // time sitting on its predicted hazard-collapse front); when the stencil
  // straddles it the matrix comes out indefinite. Shrink the step first;
  // if the shoulder is closer than any stencil, clamp the spectrum so the
  // broken direction gets a near-flat (wide-interval) curvature instead of
  // an indefinite matrix.
  if (repaired) *repaired = false;
  const Objective f = [&model](const Eigen::VectorXd& e) { return model(e); };
  Eigen::MatrixXd H;
  for (double scale : {1.0, 0.25, 0.0625}) {
    H = numeric_hessian_neg(f, eta, scale);
    if (Eigen::LLT<Eigen::MatrixXd>(H).info() == Eigen::Success) return H;
  }
  if (repaired) *repaired = true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const double floor = 1e-6 * std::max(1.0, es.eigenvalues().maxCoeff());
  Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

double laplace_log_evidence(const FitResult& fit) {
  return laplace_log_evidence(fit.log_post_at_map, fit.hessian);
}

PosteriorSample sample_normal_approx(const FitResult& fit, int n_draws, std::uint64_t seed) {
  const int d = static_cast<int>(fit.map.size());
  Eigen::LLT<Eigen::MatrixXd> llt(fit.hessian);
  if (llt.info() != Eigen::Success)
    throw NumericError("non-positive-definite Hessian in normal approximation");
  // Covariance = H^{-1}; factor it for correlated draws.
  const Eigen::MatrixXd cov =
      llt.solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::LLT<Eigen::MatrixXd> cov_llt(cov);
  if (cov_llt.info() != Eigen::Success)
    throw NumericError("covariance factorization failed in normal approximation");
  const Eigen::MatrixXd L = cov_llt.matrixL();

  PosteriorSample out;
  out.source = PosteriorSample::Source::normal_approx;
  out.seed = seed;
  out.draws.resize(n_draws, d);
  auto rng = make_engine(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd zs(d);
  for (int i = 0; i < n_draws; ++i) {
    for (int j = 0; j < d; ++j) zs[j] = z(rng);
    out.draws.row(i) = (fit.map + L * zs).transpose();
  }
  return out;
}

PosteriorSample adaptive_metropolis(const Objective& log_density, const Eigen::VectorXd& init,
                                    const McmcOptions& opts) {
  const int d = static_cast<int>(init.size());
  double lp = log_density(init);
  if (!std::isfinite(lp))
    throw NumericError("adaptive Metropolis requires a finite log-density at init");

  Eigen::MatrixXd cov = opts.init_cov.rows() == d
                            ? Eigen::MatrixXd(opts.init_cov)
                            : Eigen::MatrixXd(0.01 * Eigen::MatrixXd::Identity(d, d));
  Eigen::VectorXd mean = init;
  double log_scale = 0.0;
  const double scale0 = 2.38 * 2.38 / d;

  auto rng = make_engine(opts.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd x = init;
  Eigen::VectorXd zs(d), prop(d);
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd L;
  auto refactor = [&]() {
    Eigen::MatrixXd m = scale0 * std::exp(log_scale) *
                        (cov + 1e-10 * Eigen::MatrixXd::Identity(d, d));
    llt.compute(m);
    L = llt.matrixL();
  };
  refactor();

  std::vector<Eigen::VectorXd> kept;
  std::int64_t accepted_post = 0, total_post = 0;
  for (std::int64_t iter = 0; iter < opts.n_iter; ++iter) {
    for (int j = 0; j < d; ++j) zs[j] = z(rng);
    prop = x + L * zs;
    const double lp_prop = log_density(prop);
    const double log_ratio = lp_prop - lp;
    const double accept_prob =
        std::isfinite(lp_prop) ? std::min(1.0, std::exp(std::min(0.0, log_ratio))) : 0.0;
    const bool accept = unif(rng) < accept_prob && std::isfinite(lp_prop);
    if (accept) {
      x = prop;
      lp = lp_prop;
    }

    const bool adapting = iter < opts.burn_in;
    if (adapting) {
      // Covariance from the running history, weight 1/(iter+1); step size
      // by Robbins-Monro toward the target acceptance rate.
      const double w = 1.0 / static_cast<double>(iter + 2);
      const Eigen::VectorXd delta = x - mean;
      mean += w * delta;
      cov = (1.0 - w) * cov + w * (1.0 - w) * (delta * delta.transpose());
      log_scale += std::pow(static_cast<double>(iter + 1), -0.6) *
                   (accept_prob - opts.target_acceptance);
      refactor();
    } else {
      ++total_post;
      if (accept) ++accepted_post;
      const std::int64_t k = iter - opts.burn_in;
      if ((k + 1) % opts.thin == 0) kept.push_back(x);
    }
  }
  if (total_post > 0 && accepted_post == 0)
    throw NumericError("no proposals accepted after burn-in; chain is stuck");

  PosteriorSample out;
  out.source = PosteriorSample::Source::mcmc;
  out.seed = opts.seed;
  out.thin = opts.thin;
  out.burn_in = static_cast<int>(opts.burn_in);
  out.acceptance_rate =
      total_post > 0 ? static_cast<double>(accepted_post) / static_cast<double>(total_post)
                     : 0.0;
  out.draws.resize(static_cast<Eigen::Index>(kept.size()), d);
  for (std::size_t i = 0; i < kept.size(); ++i) out.draws.row(static_cast<Eigen::Index>(i)) = kept[i];
  return out;
}

PosteriorSample adaptive_metropolis(const PosteriorModel& model, const Eigen::VectorXd& init,
                                    const McmcOptions& opts) {
  return adaptive_metropolis([&model](const Eigen::VectorXd& e) { return model(e); }, init,
                             opts);
}

std::vector<std::pair<double, double>> credible_intervals(const PosteriorSample& sample,
                                                          double level) {
  const int n = static_cast<int>(sample.draws.rows());
  if (n < 100) throw std::invalid_argument("credible intervals need at least 100 draws");
  const double lo_p = 0.5 * (1.0 - level);
  const double hi_p = 1.0 - lo_p;
  std::vector<std::pair<double, double>> out;
  std::vector<double> col(static_cast<std::size_t>(n));
  for (int j = 0; j < sample.draws.cols(); ++j) {
    for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = sample.draws(i, j);
    out.emplace_back(quantile_type7(col, lo_p), quantile_type7(col, hi_p));
  }
  return out;
}

InfoCriteria information_criteria(double log_lik_at_map, int k, int n) {
  InfoCriteria ic;
  ic.aic = -2.0 * log_lik_at_map + 2.0 * k;
  ic.bic = -2.0 * log_lik_at_map + k * std::log(static_cast<double>(n));
  return ic;
}

}  // namespace survode
