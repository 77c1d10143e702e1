#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "survode/likelihood.hpp"

namespace survode {

// Log-density of eta, to be maximized / sampled.
using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimOptions {
  int max_iter = 500;       // quasi-Newton iterations
  int nm_max_evals = 4000;  // simplex warm-start budget
  double tol = 1e-5;        // scaled gradient-norm target
  int restarts = 3;         // jittered restarts around init (sd 0.1)
};

struct MaxResult {
  Eigen::VectorXd x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;  // scaled
};

// Two-stage maximizer: Nelder-Mead warm start, then BFGS polish with
// central-difference gradients. Deterministic for a fixed init (the restart
// jitter uses a fixed internal seed). Throws NumericError when every
// restart ends in the -inf region.
MaxResult maximize(const Objective& f, const Eigen::VectorXd& init,
                   const OptimOptions& opts = {});

// Central-difference gradient, step eps^(1/3) * max(1, |x_i|).
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x);

// Hessian of -f by central second differences, symmetrized. Throws
// NumericError if a stencil point lands in the -inf region. step_scale
// shrinks the stencil (used near posterior shoulders).
Eigen::MatrixXd numeric_hessian_neg(const Objective& f, const Eigen::VectorXd& x,
                                    double step_scale = 1.0);

// log evidence = f(max) + (d/2) log(2 pi) - 0.5 log det(hess_neg).
// Throws NumericError on a non-positive-definite Hessian.
double laplace_log_evidence(double log_post_at_max, const Eigen::MatrixXd& hess_neg);

struct FitResult {
  Eigen::VectorXd map;
  double log_post_at_map = 0.0;
  double log_lik_at_map = 0.0;
  Eigen::MatrixXd hessian;  // -grad^2 (loglik + logprior) at the MAP
  double log_evidence = std::numeric_limits<double>::quiet_NaN();
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
  bool hessian_repaired = false;  // spectrum clamped at a posterior shoulder
  int iterations = 0;
  double grad_norm = 0.0;
  int saturation_count = 0;  // link saturations at the MAP, across individuals
};

// MAP fit for a survival model; fills everything except the evidence.
FitResult find_map(const PosteriorModel& model, const Eigen::VectorXd& init,
                   const OptimOptions& opts = {});

Eigen::MatrixXd hessian_at(const PosteriorModel& model, const Eigen::VectorXd& eta,
                           bool* repaired = nullptr);

double laplace_log_evidence(const FitResult& fit);

struct PosteriorSample {
  Eigen::MatrixXd draws;  // N x d
  enum class Source { mcmc, normal_approx } source = Source::normal_approx;
  std::uint64_t seed = 0;
  double acceptance_rate = 0.0;  // mcmc only
  int thin = 1;
  int burn_in = 0;
};

// N draws from N(map, hessian^{-1}) via Cholesky factorization.
PosteriorSample sample_normal_approx(const FitResult& fit, int n_draws, std::uint64_t seed);

struct McmcOptions {
  std::int64_t n_iter = 55000;
  std::int64_t burn_in = 5000;
  int thin = 50;
  std::uint64_t seed = 0;
  double target_acceptance = 0.234;
  // Optional initial proposal covariance (e.g. Hessian inverse); identity
  // scaled by 0.01 otherwise.
  Eigen::MatrixXd init_cov;
};

// Adaptive random-walk Metropolis: covariance adapted from the chain history
// with weight 1/(iter+1), log step size adapted toward the target acceptance
// rate, adaptation frozen after burn-in. Generic over the target density,
// which doubles as the test hook.
PosteriorSample adaptive_metropolis(const Objective& log_density, const Eigen::VectorXd& init,
                                    const McmcOptions& opts);

PosteriorSample adaptive_metropolis(const PosteriorModel& model, const Eigen::VectorXd& init,
                                    const McmcOptions& opts);

// Per-coordinate empirical central interval (type-7 quantiles).
std::vector<std::pair<double, double>> credible_intervals(const PosteriorSample& sample,
                                                          double level = 0.95);

struct InfoCriteria {
  double aic = 0.0;
  double bic = 0.0;
};
InfoCriteria information_criteria(double log_lik_at_map, int k, int n);

}  // namespace survode
