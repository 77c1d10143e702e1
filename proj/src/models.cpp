#include "survode/models.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace survode {

namespace {
bool pos_finite(double v) { return std::isfinite(v) && v > 0.0; }
}  // namespace

bool LogisticParams::valid() const {
  return pos_finite(lambda) && pos_finite(kappa) && pos_finite(h0);
}

bool HazardResponseParams::valid() const {
  return pos_finite(lambda) && pos_finite(kappa) && pos_finite(alpha) &&
         pos_finite(mu) && pos_finite(h0) && pos_finite(q0);
}

int InclusionMask::active_count() const {
  int c = 0;
  for (const auto& row : bits)
    for (int b : row) c += b;
  return c;
}

std::string InclusionMask::key() const {
  std::string s;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (k > 0) s += '|';
    for (int b : bits[k]) s += b ? '1' : '0';
  }
  return s;
}

InclusionMask InclusionMask::parse(const std::string& key) {
  InclusionMask m;
  m.bits.emplace_back();
  for (char c : key) {
    if (c == '|') {
      m.bits.emplace_back();
    } else if (c == '0' || c == '1') {
      m.bits.back().push_back(c - '0');
    } else {
      throw std::invalid_argument("bad mask character in '" + key + "'");
    }
  }
  for (const auto& row : m.bits)
    if (row.size() != m.bits[0].size())
      throw std::invalid_argument("ragged mask blocks in '" + key + "'");
  return m;
}

InclusionMask InclusionMask::empty(int d, int p) {
  InclusionMask m;
  m.bits.assign(d, std::vector<int>(p, 0));
  return m;
}

std::vector<std::string> ModelSpec::param_names() const {
  if (family == Family::logistic) return {"lambda", "kappa"};
  return {"lambda", "kappa", "alpha", "mu"};
}

int ModelSpec::full_dim() const {
  int d = 0;
  for (const auto& f : formulas) d += 1 + static_cast<int>(f.size());
  if (h0_free()) d += 1;
  return d;
}

InclusionMask ModelSpec::full_mask(int n_columns) const {
  InclusionMask m = InclusionMask::empty(n_ode_params(), n_columns);
  for (int k = 0; k < n_ode_params(); ++k)
    for (int col : formulas[k]) m.bits[k][col] = 1;
  return m;
}

InclusionMask ModelSpec::empty_mask(int n_columns) const {
  return InclusionMask::empty(n_ode_params(), n_columns);
}

int ModelSpec::candidate_count() const {
  int c = 0;
  for (const auto& f : formulas) c += static_cast<int>(f.size());
  return c;
}

void ModelSpec::validate(int n_columns) const {
  const int d = n_ode_params();
  if (static_cast<int>(formulas.size()) != d)
    throw std::invalid_argument("formulas must list one entry per ODE parameter");
  if (static_cast<int>(links.size()) != d)
    throw std::invalid_argument("links must list one entry per ODE parameter");
  for (const auto& f : formulas)
    for (int col : f)
      if (col < 0 || col >= n_columns)
        throw std::invalid_argument("formula references covariate column " +
                                    std::to_string(col) + " outside the dataset");
  // All ODE parameters of both families are positivity-constrained.
  for (int k = 0; k < d; ++k)
    if (links[k] != Link::log)
      throw std::invalid_argument("identity link rejected for positive ODE parameter '" +
                                  param_names()[k] + "'");
  if (family == Family::hazard_response && h0_mode != H0Mode::fixed)
    throw std::invalid_argument("hazard-response initials must be fixed from context");
  if (h0_mode != H0Mode::free && !pos_finite(h0))
    throw std::invalid_argument("h0 must be positive and finite");
  if (family == Family::hazard_response && !pos_finite(q0))
    throw std::invalid_argument("q0 must be positive and finite");
  if (!(max_time > 0.0))
    throw std::invalid_argument("max_time must be positive");
}

ParamLayout ParamLayout::make(const ModelSpec& spec, const InclusionMask& mask) {
  ParamLayout layout;
  int idx = 0;
  for (int k = 0; k < spec.n_ode_params(); ++k) {
    Block b;
    b.intercept = idx++;
    for (int col : spec.formulas[k]) {
      if (mask.bits[k][col]) b.coefs.emplace_back(col, idx++);
    }
    layout.blocks.push_back(std::move(b));
  }
  if (spec.h0_free()) layout.logh0 = idx++;
  layout.dim = idx;
  return layout;
}

ParamLayout ParamLayout::make_full(const ModelSpec& spec) {
  int max_col = 0;
  for (const auto& f : spec.formulas)
    for (int col : f) max_col = std::max(max_col, col + 1);
  return make(spec, spec.full_mask(max_col));
}

std::vector<std::string> ParamLayout::names(const ModelSpec& spec,
                                            const std::vector<std::string>& column_names) const {
  std::vector<std::string> out(static_cast<std::size_t>(dim));
  const auto pnames = spec.param_names();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    out[blocks[k].intercept] = pnames[k] + ".intercept";
    for (const auto& [col, idx] : blocks[k].coefs)
      out[idx] = pnames[k] + "." + column_names[col];
  }
  if (logh0 >= 0) out[logh0] = "log_h0";
  return out;
}

double apply_inverse_link(Link link, double value, bool* saturated) {
  if (link == Link::identity) return value;
  if (value > std::log(kLinkCap)) {
    if (saturated) *saturated = true;
    return kLinkCap;
  }
  return std::exp(value);
}

double apply_forward_link(Link link, double theta) {
  return link == Link::identity ? theta : std::log(theta);
}

bool try_eval_predictors(const ModelSpec& spec, const ParamLayout& layout,
                         const Eigen::VectorXd& eta, const double* x, int p,
                         PredictorValues* out) noexcept {
  for (int k = 0; k < spec.n_ode_params(); ++k) {
    const auto& block = layout.blocks[k];
    double lp = eta[block.intercept];
    for (const auto& [col, idx] : block.coefs) {
      if (col >= p || std::isnan(x[col])) return false;
      lp += x[col] * eta[idx];
    }
    if (std::isnan(lp)) return false;
    out->theta[k] = apply_inverse_link(spec.links[k], lp, &out->saturated);
  }
  return true;
}

bool try_logistic_params(const ModelSpec& spec, const ParamLayout& layout,
                         const Eigen::VectorXd& eta, const double* x, int p,
                         LogisticParams* out, bool* saturated) noexcept {
  PredictorValues v;
  if (!try_eval_predictors(spec, layout, eta, x, p, &v)) return false;
  if (saturated && v.saturated) *saturated = true;
  out->lambda = v.theta[0];
  out->kappa = v.theta[1];
  switch (spec.h0_mode) {
    case H0Mode::fixed: out->h0 = spec.h0; break;
    case H0Mode::tied_to_kappa: out->h0 = out->kappa; break;
    case H0Mode::free: {
      const double lh = eta[layout.logh0];
      if (std::isnan(lh)) return false;
      bool sat = false;
      out->h0 = apply_inverse_link(Link::log, lh, &sat);
      if (saturated && sat) *saturated = true;
      break;
    }
  }
  return true;
}

bool try_hazard_response_params(const ModelSpec& spec, const ParamLayout& layout,
                                const Eigen::VectorXd& eta, const double* x, int p,
                                HazardResponseParams* out, bool* saturated) noexcept {
  PredictorValues v;
  if (!try_eval_predictors(spec, layout, eta, x, p, &v)) return false;
  if (saturated && v.saturated) *saturated = true;
  out->lambda = v.theta[0];
  out->kappa = v.theta[1];
  out->alpha = v.theta[2];
  out->mu = v.theta[3];
  out->h0 = spec.h0;
  out->q0 = spec.q0;
  return true;
}

PredictorValues eval_predictors_raw(const ModelSpec& spec, const ParamLayout& layout,
                                    const Eigen::VectorXd& eta, const double* x, int p) {
  PredictorValues out;
  if (!try_eval_predictors(spec, layout, eta, x, p, &out))
    throw std::invalid_argument("NaN covariate or linear predictor");
  return out;
}

LogisticParams logistic_params(const ModelSpec& spec, const ParamLayout& layout,
                               const Eigen::VectorXd& eta, const double* x, int p,
                               bool* saturated) {
  LogisticParams out;
  if (!try_logistic_params(spec, layout, eta, x, p, &out, saturated))
    throw std::invalid_argument("NaN covariate or linear predictor");
  return out;
}

HazardResponseParams hazard_response_params(const ModelSpec& spec, const ParamLayout& layout,
                                            const Eigen::VectorXd& eta, const double* x, int p,
                                            bool* saturated) {
  HazardResponseParams out;
  if (!try_hazard_response_params(spec, layout, eta, x, p, &out, saturated))
    throw std::invalid_argument("NaN covariate or linear predictor");
  return out;
}

LogisticParams eval_logistic(const ModelSpec& spec, const Eigen::VectorXd& eta,
                             const Eigen::VectorXd& x) {
  const ParamLayout layout = ParamLayout::make_full(spec);
  return logistic_params(spec, layout, eta, x.data(), static_cast<int>(x.size()));
}

HazardResponseParams eval_hazard_response(const ModelSpec& spec, const Eigen::VectorXd& eta,
                                          const Eigen::VectorXd& x) {
  const ParamLayout layout = ParamLayout::make_full(spec);
  return hazard_response_params(spec, layout, eta, x.data(), static_cast<int>(x.size()));
}

// h(t) = kappa / (1 + (kappa/h0 - 1) e^{-lambda t}). Equivalent to the
// textbook form but free of e^{lambda t} overflow; exact at h0 == kappa.
double logistic_hazard(double t, const LogisticParams& p) {
  const double w = (p.kappa / p.h0 - 1.0) * std::exp(-p.lambda * t);
  return p.kappa / (1.0 + w);
}

// H(t) = (kappa/lambda) [lambda t + log1p(w0 e^{-lambda t}) - log1p(w0)]
// with w0 = kappa/h0 - 1; the log1p terms cancel exactly at t = 0.
double logistic_cumhaz(double t, const LogisticParams& p) {
  const double w0 = p.kappa / p.h0 - 1.0;
  return (p.kappa / p.lambda) *
         (p.lambda * t + std::log1p(w0 * std::exp(-p.lambda * t)) - std::log1p(w0));
}

ode::OdeSystem make_hazard_response_system(const HazardResponseParams& p) {
  ode::OdeSystem sys;
  sys.dimension = 3;
  sys.rhs = [p](const double* y, double* dy) { hazard_response_rhs(y, dy, p); };
  return sys;
}

ode::OdeSystem make_logistic_system(const LogisticParams& p) {
  ode::OdeSystem sys;
  sys.dimension = 2;
  sys.rhs = [p](const double* y, double* dy) {
    dy[0] = p.lambda * y[0] * (1.0 - y[0] / p.kappa);
    dy[1] = y[0];
  };
  return sys;
}

Attractor classify_attractor(const HazardResponseParams& p) {
  constexpr double kTol = 1e-12;
  Attractor a;
  const double ak = p.alpha * p.kappa;
  a.D = 1.0 - ak * ak / (p.lambda * p.mu);
  if (std::abs(a.D) < kTol) {
    a.kind = AttractorKind::degenerate;
    a.h_star = a.q_star = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  a.h_star = p.kappa * (1.0 - ak / p.lambda) / a.D;
  a.q_star = p.kappa * (1.0 - ak / p.mu) / a.D;
  if (std::abs(a.h_star) < kTol || std::abs(a.q_star) < kTol) {
    a.kind = AttractorKind::degenerate;
  } else if (a.q_star < 0.0) {
    a.kind = AttractorKind::hazard_wins;
  } else if (a.h_star < 0.0) {
    a.kind = AttractorKind::response_wins;
  } else {
    a.kind = AttractorKind::coexistence;
  }
  return a;
}

}  // namespace survode
