#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "survode/data.hpp"
#include "survode/models.hpp"

namespace survode {

struct GammaPrior {
  double shape = 2.0;
  double rate = 0.5;
};

// Parameter priors: normal intercepts, group g-prior (or plain normal)
// coefficients, optional gamma prior on a free h0, and the model-space
// complexity constant.
struct PriorSpec {
  enum class CoefKind { gprior, normal };

  Eigen::VectorXd intercept_sd;  // one per ODE parameter
  CoefKind coef_kind = CoefKind::gprior;
  Eigen::VectorXd g;     // g-prior scale per ODE parameter
  double coef_sd = 10.0;  // normal fallback
  std::optional<GammaPrior> h0_prior;
  double complexity_C = 0.0;

  void validate(int n_ode_params) const;

  static PriorSpec normal_iid(int n_ode_params, double sd);
  // g_k = (n - 0.5 c) / divisor_k, the effective-sample-size calibration.
  static PriorSpec effective_sample_size(const SurvivalDataset& data, int n_ode_params,
                                         double intercept_sd,
                                         const Eigen::VectorXd& divisors);
};

// Cholesky factors of per-block Gram matrices X_k' X_k over included columns,
// memoized per (parameter, column set). Selection re-evaluates masks heavily.
class GramCache {
 public:
  struct Entry {
    Eigen::MatrixXd L;  // lower Cholesky factor of the Gram matrix
    double log_det = 0.0;
  };
  // Throws ValidationError when the Gram block is singular (collinearity).
  const Entry& get(const Eigen::MatrixXd& design, int k, const std::vector<int>& cols,
                   const std::string& block_name);

 private:
  std::mutex mu_;
  std::unordered_map<std::string, std::unique_ptr<Entry>> entries_;
};

// Right-censored log-likelihood: sum_i delta_i log h(t_i) - H(t_i).
// Invalid parameters or solve failures yield -inf (the rejection sentinel
// for optimizers and samplers). OpenMP-parallel over individuals in chunks
// of 64 with a fixed-order reduction; values are identical for any thread
// count.
double log_likelihood(const SurvivalDataset& data, const ModelSpec& spec,
                      const ParamLayout& layout, const Eigen::VectorXd& eta,
                      const ode::Options& solver = {});

// Serial reference implementation; kept for testing and benchmarking
// against the parallel kernel, which must reproduce it bit for bit.
double log_likelihood_serial(const SurvivalDataset& data, const ModelSpec& spec,
                             const ParamLayout& layout, const Eigen::VectorXd& eta,
                             const ode::Options& solver = {});

// Full-mask conveniences.
double log_likelihood(const SurvivalDataset& data, const ModelSpec& spec,
                      const Eigen::VectorXd& eta, const ode::Options& solver = {});

// log prior density of eta under the inclusion mask.
double log_prior(const ModelSpec& spec, const ParamLayout& layout,
                 const Eigen::VectorXd& eta, const InclusionMask& mask,
                 const PriorSpec& priors, const Eigen::MatrixXd& design,
                 GramCache* cache = nullptr);

// Unnormalized model-space prior: -C * |gamma| * log(d_tilde).
double log_complexity_prior(const InclusionMask& mask, double C, int d_tilde);

double log_posterior(const SurvivalDataset& data, const ModelSpec& spec,
                     const ParamLayout& layout, const Eigen::VectorXd& eta,
                     const InclusionMask& mask, const PriorSpec& priors,
                     GramCache* cache = nullptr, const ode::Options& solver = {});

// Bundles dataset, model, mask and priors into the log-posterior callable
// used by optimizers, samplers and the selection loop.
class PosteriorModel {
 public:
  PosteriorModel(const SurvivalDataset& data, const ModelSpec& spec, InclusionMask mask,
                 PriorSpec priors, ode::Options solver = {});

  double operator()(const Eigen::VectorXd& eta) const;
  double loglik(const Eigen::VectorXd& eta) const;

  const ParamLayout& layout() const { return layout_; }
  const InclusionMask& mask() const { return mask_; }
  const SurvivalDataset& data() const { return *data_; }
  const ModelSpec& spec() const { return *spec_; }
  const PriorSpec& priors() const { return priors_; }
  const ode::Options& solver() const { return solver_; }
  GramCache& gram_cache() const { return *gram_; }

 private:
  const SurvivalDataset* data_;
  const ModelSpec* spec_;
  InclusionMask mask_;
  PriorSpec priors_;
  ode::Options solver_;
  ParamLayout layout_;
  std::shared_ptr<GramCache> gram_;
};

}  // namespace survode
