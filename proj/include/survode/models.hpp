#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "survode/ode.hpp"

namespace survode {

enum class Family { logistic, hazard_response };
enum class Link { log, identity };

// How the logistic initial hazard enters the parameter vector. The
// hazard-response initials are always fixed from context.
enum class H0Mode { fixed, free, tied_to_kappa };

struct LogisticParams {
  double lambda = 1.0;  // growth rate of the hazard
  double kappa = 1.0;   // carrying capacity
  double h0 = 1.0;      // hazard at t = 0
  bool valid() const;
};

struct HazardResponseParams {
  double lambda = 1.0;  // hazard growth rate
  double kappa = 1.0;   // shared carrying capacity
  double alpha = 1.0;   // competition coefficient
  double mu = 1.0;      // response growth rate
  double h0 = 0.01;
  double q0 = 1e-6;
  bool valid() const;
};

// Inclusion state for variable selection: one bit per (ODE parameter,
// dataset column). Intercepts are always included implicitly. Columns not
// listed in the model formulas stay zero.
struct InclusionMask {
  std::vector<std::vector<int>> bits;  // d rows, p columns, entries 0/1

  int n_params() const { return static_cast<int>(bits.size()); }
  int n_columns() const { return bits.empty() ? 0 : static_cast<int>(bits[0].size()); }
  int active_count() const;

  // Row-major bitstring with per-parameter blocks separated by '|',
  // e.g. "0110|1000|0010|1101".
  std::string key() const;
  static InclusionMask parse(const std::string& key);

  static InclusionMask empty(int d, int p);
  bool operator==(const InclusionMask& other) const { return bits == other.bits; }
};

// Which ODE family, link per parameter, candidate covariates per parameter,
// fixed initial conditions and follow-up horizon.
struct ModelSpec {
  Family family = Family::logistic;
  std::vector<Link> links;                 // one per ODE parameter
  std::vector<std::vector<int>> formulas;  // candidate column indices per parameter
  double h0 = 0.01;
  double q0 = 1e-6;
  H0Mode h0_mode = H0Mode::fixed;
  double max_time = 0.0;  // compact follow-up horizon (tau)

  int n_ode_params() const { return family == Family::logistic ? 2 : 4; }
  bool h0_free() const { return h0_mode == H0Mode::free; }
  std::vector<std::string> param_names() const;

  // Per-parameter block dimensions plus intercepts plus optional free h0,
  // under the full (all formula covariates included) mask.
  int full_dim() const;
  InclusionMask full_mask(int n_columns) const;
  InclusionMask empty_mask(int n_columns) const;

  // Total candidate coefficient count, sum over formulas; the base of the
  // complexity prior.
  int candidate_count() const;

  // Throws std::invalid_argument on bad column indices, identity links on
  // positivity-constrained parameters, or h0 modes not supported by the family.
  void validate(int n_columns) const;
};

// Index map from (spec, mask) into a flat parameter vector: per ODE
// parameter an intercept followed by the included coefficients in ascending
// column order, then log(h0) if free.
struct ParamLayout {
  struct Block {
    int intercept = -1;
    std::vector<std::pair<int, int>> coefs;  // (dataset column, vector index)
  };
  std::vector<Block> blocks;
  int logh0 = -1;
  int dim = 0;

  static ParamLayout make(const ModelSpec& spec, const InclusionMask& mask);
  static ParamLayout make_full(const ModelSpec& spec);
  std::vector<std::string> names(const ModelSpec& spec,
                                 const std::vector<std::string>& column_names) const;
};

// Inverse-link output cap; exp overflows are saturated here and flagged.
inline constexpr double kLinkCap = 1e12;

double apply_inverse_link(Link link, double value, bool* saturated);
double apply_forward_link(Link link, double theta);

// Linear predictors evaluated for one covariate row. Output order matches
// param_names(). NaN covariates throw; saturation is reported via the flag.
struct PredictorValues {
  double theta[4] = {0, 0, 0, 0};
  bool saturated = false;
};

// noexcept variants returning false on NaN input, used inside parallel
// loops where throwing is not an option.
bool try_eval_predictors(const ModelSpec& spec, const ParamLayout& layout,
                         const Eigen::VectorXd& eta, const double* x, int p,
                         PredictorValues* out) noexcept;
bool try_logistic_params(const ModelSpec& spec, const ParamLayout& layout,
                         const Eigen::VectorXd& eta, const double* x, int p,
                         LogisticParams* out, bool* saturated = nullptr) noexcept;
bool try_hazard_response_params(const ModelSpec& spec, const ParamLayout& layout,
                                const Eigen::VectorXd& eta, const double* x, int p,
                                HazardResponseParams* out,
                                bool* saturated = nullptr) noexcept;

PredictorValues eval_predictors_raw(const ModelSpec& spec, const ParamLayout& layout,
                                    const Eigen::VectorXd& eta, const double* x, int p);

LogisticParams logistic_params(const ModelSpec& spec, const ParamLayout& layout,
                               const Eigen::VectorXd& eta, const double* x, int p,
                               bool* saturated = nullptr);
HazardResponseParams hazard_response_params(const ModelSpec& spec, const ParamLayout& layout,
                                            const Eigen::VectorXd& eta, const double* x, int p,
                                            bool* saturated = nullptr);

// Full-mask convenience used by callers outside the selection loop.
LogisticParams eval_logistic(const ModelSpec& spec, const Eigen::VectorXd& eta,
                             const Eigen::VectorXd& x);
HazardResponseParams eval_hazard_response(const ModelSpec& spec, const Eigen::VectorXd& eta,
                                          const Eigen::VectorXd& x);

// Closed-form logistic hazard and cumulative hazard, stable for large
// lambda*t (h -> kappa, H -> kappa*t + const).
double logistic_hazard(double t, const LogisticParams& p);
double logistic_cumhaz(double t, const LogisticParams& p);

// Right-hand side of the hazard-response system, state (h, q, H).
inline void hazard_response_rhs(const double* y, double* dy, const HazardResponseParams& p) {
  const double h = y[0], q = y[1];
  dy[0] = p.lambda * h * (1.0 - h / p.kappa) - p.alpha * q * h;
  dy[1] = p.mu * q * (1.0 - q / p.kappa) - p.alpha * q * h;
  dy[2] = h;
}

// Inline functor for the hot solver path.
struct HazardResponseRhs {
  HazardResponseParams p;
  void operator()(const double* y, double* dy) const { hazard_response_rhs(y, dy, p); }
};

ode::OdeSystem make_hazard_response_system(const HazardResponseParams& p);
// Logistic family as a 2-state (h, H) system, used as a cross-check oracle
// for the closed form.
ode::OdeSystem make_logistic_system(const LogisticParams& p);

// Long-run regime of the hazard-response system.
enum class AttractorKind { hazard_wins, response_wins, coexistence, degenerate };

struct Attractor {
  AttractorKind kind = AttractorKind::degenerate;
  double h_star = 0.0;
  double q_star = 0.0;
  double D = 0.0;
};

Attractor classify_attractor(const HazardResponseParams& p);

}  // namespace survode
