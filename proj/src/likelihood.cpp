#include "survode/likelihood.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "survode/math.hpp"

namespace survode {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void PriorSpec::validate(int n_ode_params) const {
  if (intercept_sd.size() != n_ode_params)
    throw std::invalid_argument("intercept_sd must have one entry per ODE parameter");
  for (int k = 0; k < n_ode_params; ++k)
    if (!(intercept_sd[k] > 0.0)) throw std::invalid_argument("intercept sd must be positive");
  if (coef_kind == CoefKind::gprior) {
    if (g.size() != n_ode_params)
      throw std::invalid_argument("g must have one entry per ODE parameter");
    for (int k = 0; k < n_ode_params; ++k)
      if (!(g[k] > 0.0)) throw std::invalid_argument("g-prior scale must be positive");
  } else if (!(coef_sd > 0.0)) {
    throw std::invalid_argument("coefficient sd must be positive");
  }
  if (h0_prior && (!(h0_prior->shape > 0.0) || !(h0_prior->rate > 0.0)))
    throw std::invalid_argument("gamma prior parameters must be positive");
  if (complexity_C < 0.0) throw std::invalid_argument("complexity constant must be >= 0");
}

PriorSpec PriorSpec::normal_iid(int n_ode_params, double sd) {
  PriorSpec p;
  p.intercept_sd = Eigen::VectorXd::Constant(n_ode_params, sd);
  p.coef_kind = CoefKind::normal;
  p.coef_sd = sd;
  return p;
}

PriorSpec PriorSpec::effective_sample_size(const SurvivalDataset& data, int n_ode_params,
                                           double intercept_sd,
                                           const Eigen::VectorXd& divisors) {
  PriorSpec p;
  p.intercept_sd = Eigen::VectorXd::Constant(n_ode_params, intercept_sd);
  p.coef_kind = CoefKind::gprior;
  const double ess = data.n() - 0.5 * data.censored();
  p.g.resize(n_ode_params);
  const bool has_div = divisors.size() == static_cast<Eigen::Index>(n_ode_params);
  for (int k = 0; k < n_ode_params; ++k) p.g[k] = ess / (has_div ? divisors[k] : 1.0);
  return p;
}

const GramCache::Entry& GramCache::get(const Eigen::MatrixXd& design, int k,
                                       const std::vector<int>& cols,
                                       const std::string& block_name) {
  std::string key = std::to_string(k) + ":";
  for (int c : cols) key += std::to_string(c) + ",";
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return *it->second;
  }
  const int p = static_cast<int>(cols.size());
  Eigen::MatrixXd X(design.rows(), p);
  for (int j = 0; j < p; ++j) X.col(j) = design.col(cols[j]);
  const Eigen::MatrixXd gram = X.transpose() * X;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw ValidationError("singular Gram matrix (collinear covariates) in block '" +
                          block_name + "'");
  auto entry = std::make_unique<Entry>();
  entry->L = llt.matrixL();
  entry->log_det = 0.0;
  for (int j = 0; j < p; ++j) entry->log_det += 2.0 * std::log(entry->L(j, j));
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = entries_.emplace(key, std::move(entry));
  return *it->second;
}

namespace {

// One individual's contribution: delta log h(t) - H(t), or -inf.
double logistic_contrib(double t, int delta, const LogisticParams& p) {
  if (!p.valid()) return kNegInf;
  const double h = logistic_hazard(t, p);
  const double H = logistic_cumhaz(t, p);
  if (!(h > 0.0) || !std::isfinite(H)) return kNegInf;
  return (delta ? std::log(h) : 0.0) - H;
}

double hazard_response_contrib(double t, int delta, const HazardResponseParams& p,
                               const ode::Options& solver) {
  if (!p.valid()) return kNegInf;
  const double y0[3] = {p.h0, p.q0, 0.0};
  double y[3];
  const ode::Status st = ode::solve_to(HazardResponseRhs{p}, 3, y0, t, solver, y);
  if (!st.ok) return kNegInf;
  const double h = y[0], H = y[2];
  if (!(h > 0.0) || !std::isfinite(H)) return kNegInf;
  return (delta ? std::log(h) : 0.0) - H;
}

// Fills per-individual contributions; the caller reduces in index order.
// A single -inf contribution already makes the total -inf, so the loop
// short-circuits on the first failure (the skipped entries stay -inf, and
// the reduced value is identical for any thread count either way).
void fill_contribs(const SurvivalDataset& data, const ModelSpec& spec,
                   const ParamLayout& layout, const Eigen::VectorXd& eta,
                   const ode::Options& solver, bool parallel, std::vector<double>& out) {
  const int n = data.n();
  const int p = data.p();
  out.assign(static_cast<std::size_t>(n), kNegInf);
  if (!eta.allFinite()) return;
  std::atomic<bool> failed{false};
  if (spec.family == Family::logistic) {
#pragma omp parallel for schedule(dynamic, 64) if (parallel)
    for (int i = 0; i < n; ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      Eigen::RowVectorXd row = data.covariates.row(i);
      LogisticParams lp;
      if (try_logistic_params(spec, layout, eta, row.data(), p, &lp))
        out[i] = logistic_contrib(data.times[i], data.status[i], lp);
      if (out[i] == kNegInf) failed.store(true, std::memory_order_relaxed);
    }
  } else {
#pragma omp parallel for schedule(dynamic, 64) if (parallel)
    for (int i = 0; i < n; ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      Eigen::RowVectorXd row = data.covariates.row(i);
      HazardResponseParams hp;
      if (try_hazard_response_params(spec, layout, eta, row.data(), p, &hp))
        out[i] = hazard_response_contrib(data.times[i], data.status[i], hp, solver);
      if (out[i] == kNegInf) failed.store(true, std::memory_order_relaxed);
    }
  }
}

double reduce_ordered(const std::vector<double>& contribs) {
  double total = 0.0;
  for (double c : contribs) {
    if (c == kNegInf) return kNegInf;
    total += c;
  }
  return total;
}

}  // namespace

double log_likelihood(const SurvivalDataset& data, const ModelSpec& spec,
                      const ParamLayout& layout, const Eigen::VectorXd& eta,
                      const ode::Options& solver) {
  static thread_local std::vector<double> contribs;
  fill_contribs(data, spec, layout, eta, solver, true, contribs);
  return reduce_ordered(contribs);
}

double log_likelihood_serial(const SurvivalDataset& data, const ModelSpec& spec,
                             const ParamLayout& layout, const Eigen::VectorXd& eta,
                             const ode::Options& solver) {
  std::vector<double> contribs;
  fill_contribs(data, spec, layout, eta, solver, false, contribs);
  return reduce_ordered(contribs);
}

double log_likelihood(const SurvivalDataset& data, const ModelSpec& spec,
                      const Eigen::VectorXd& eta, const ode::Options& solver) {
  return log_likelihood(data, spec, ParamLayout::make_full(spec), eta, solver);
}

double log_prior(const ModelSpec& spec, const ParamLayout& layout,
                 const Eigen::VectorXd& eta, const InclusionMask& mask,
                 const PriorSpec& priors, const Eigen::MatrixXd& design,
                 GramCache* cache) {
  (void)mask;
  double lp = 0.0;
  const auto names = spec.param_names();
  GramCache local;
  GramCache& gc = cache ? *cache : local;
  for (int k = 0; k < spec.n_ode_params(); ++k) {
    const auto& block = layout.blocks[k];
    lp += normal_logpdf(eta[block.intercept], 0.0, priors.intercept_sd[k]);
    const int pk = static_cast<int>(block.coefs.size());
    if (pk == 0) continue;
    if (priors.coef_kind == PriorSpec::CoefKind::normal) {
      for (const auto& [col, idx] : block.coefs)
        lp += normal_logpdf(eta[idx], 0.0, priors.coef_sd);
      continue;
    }
    // N(0, g_k (X_k' X_k)^{-1}): log density via the Gram Cholesky factor.
    std::vector<int> cols;
    cols.reserve(pk);
    Eigen::VectorXd beta(pk);
    for (int j = 0; j < pk; ++j) {
      cols.push_back(block.coefs[j].first);
      beta[j] = eta[block.coefs[j].second];
    }
    const auto& entry = gc.get(design, k, cols, names[k]);
    // quadratic form beta' (G/g) beta = |L' beta|^2 / g
    const Eigen::VectorXd Ltb = entry.L.transpose() * beta;
    const double quad = Ltb.squaredNorm() / priors.g[k];
    const double log_det_cov = pk * std::log(priors.g[k]) - entry.log_det;
    lp += -0.5 * (pk * std::log(2.0 * M_PI) + log_det_cov + quad);
  }
  if (layout.logh0 >= 0 && priors.h0_prior) {
    // Gamma prior on h0 itself; eta carries log h0, hence the Jacobian term.
    // Without an h0 prior the contribution is flat on the log scale.
    const double logh0 = eta[layout.logh0];
    const double h0 = std::exp(logh0);
    lp += gamma_logpdf(h0, priors.h0_prior->shape, priors.h0_prior->rate) + logh0;
  }
  return lp;
}

double log_complexity_prior(const InclusionMask& mask, double C, int d_tilde) {
  if (C < 0.0) throw std::invalid_argument("complexity constant must be >= 0");
  if (C == 0.0) return 0.0;
  return -C * mask.active_count() * std::log(static_cast<double>(d_tilde));
}

double log_posterior(const SurvivalDataset& data, const ModelSpec& spec,
                     const ParamLayout& layout, const Eigen::VectorXd& eta,
                     const InclusionMask& mask, const PriorSpec& priors,
                     GramCache* cache, const ode::Options& solver) {
  const double ll = log_likelihood(data, spec, layout, eta, solver);
  if (ll == kNegInf) return kNegInf;
  return ll + log_prior(spec, layout, eta, mask, priors, data.covariates, cache);
}

PosteriorModel::PosteriorModel(const SurvivalDataset& data, const ModelSpec& spec,
                               InclusionMask mask, PriorSpec priors, ode::Options solver)
    : data_(&data),
      spec_(&spec),
      mask_(std::move(mask)),
      priors_(std::move(priors)),
      solver_(solver),
      layout_(ParamLayout::make(spec, mask_)),
      gram_(std::make_shared<GramCache>()) {
  priors_.validate(spec.n_ode_params());
}

double PosteriorModel::operator()(const Eigen::VectorXd& eta) const {
  return log_posterior(*data_, *spec_, layout_, eta, mask_, priors_, gram_.get(), solver_);
}

double PosteriorModel::loglik(const Eigen::VectorXd& eta) const {
  return log_likelihood(*data_, *spec_, layout_, eta, solver_);
}

}  // namespace survode
