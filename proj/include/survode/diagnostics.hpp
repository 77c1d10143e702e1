#pragma once

#include <functional>

#include "survode/inference.hpp"

namespace survode {

// Total variation distance between kernel density estimates of two draws
// vectors: half the L1 distance, integrated adaptively over the union
// support extended by five bandwidths, clipped to [0,1]. Bandwidths follow
// Silverman's rule unless overridden (> 0).
double tv_distance(const std::vector<double>& sample_a, const std::vector<double>& sample_b,
                   double bandwidth_override = 0.0);

// Restricted L1 distance between two hazard curves on [0, t_star] by
// composite trapezoid quadrature; step defaults to 1e-3 * t_star.
double l1_hazard_distance(const std::function<double(double)>& h_a,
                          const std::function<double(double)>& h_b, double t_star,
                          double quad_step = 0.0);

// Product-limit estimator. Ties are handled by processing all events at a
// time before censorings at the same time. survival[i] is the value just
// after times[i]; S(0) = 1 implicitly.
struct KMCurve {
  std::vector<double> times;
  std::vector<double> survival;
  double at(double t) const;  // right-continuous step evaluation
};

KMCurve kaplan_meier(const std::vector<double>& times, const std::vector<int>& status);
// One curve per distinct value of the grouping covariate, keyed by value.
std::vector<std::pair<double, KMCurve>> kaplan_meier(const SurvivalDataset& data,
                                                     int group_column);

struct CurveBand {
  std::vector<double> mean;
  std::vector<double> lo95;
  std::vector<double> hi95;
};

// Pointwise posterior summaries of hazard, response and survival curves for
// one covariate profile, plus attractor probabilities (hazard-response).
struct PredictiveCurves {
  std::vector<double> grid;
  CurveBand hazard;
  CurveBand response;  // hazard-response only
  CurveBand survival;
  bool has_response = false;
  double pr_hazard_loses = 0.0;  // Pr(h* < 0)
  double pr_response_loses = 0.0;  // Pr(q* < 0)
  double pr_coexist = 0.0;         // Pr(h* > 0, q* > 0)
  int failed_draws = 0;
};

// Evaluates the model for every posterior draw at x_profile over the grid.
// Draws whose solve fails are dropped and counted; more than 1% failures is
// an error.
PredictiveCurves predictive_curves(const ModelSpec& spec, const InclusionMask& mask,
                                   const PosteriorSample& posterior,
                                   const Eigen::VectorXd& x_profile,
                                   const std::vector<double>& time_grid,
                                   const ode::Options& solver = {});

}  // namespace survode
