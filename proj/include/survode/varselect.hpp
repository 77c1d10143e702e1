#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <unordered_map>

#include "survode/inference.hpp"

namespace survode {

// Memoized per-model evidence: selection revisits masks heavily and the
// Laplace fits are deterministic, so cached values are reused verbatim.
class ModelCache {
 public:
  struct Entry {
    double log_evidence = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd map;
    bool ok = false;  // false when the evidence computation failed
  };

  const Entry* find(const std::string& key) const;
  void put(const std::string& key, Entry entry);
  std::size_t size() const;
  std::map<std::string, Entry> snapshot() const;

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Entry> entries_;
};

// Full-conditional flip probability from log evidences and log model
// priors, computed in log space. Both pairs -inf is an error.
double flip_probability(double log_ev_new, double log_prior_new, double log_ev_old,
                        double log_prior_old);

struct SelectOptions {
  int n_iter = 1100;   // Gibbs sweeps
  int burn_in = 100;   // discarded sweeps
  std::uint64_t seed = 0;
  OptimOptions optim{};
  ode::Options solver{};
};

struct SelectionResult {
  std::map<std::string, int> visit_counts;  // post-burn-in, by mask key
  Eigen::MatrixXd inclusion_probs;          // d x p marginal inclusion probabilities
  InclusionMask median;                     // bits with probability > 0.5
  std::shared_ptr<ModelCache> cache;
  std::vector<std::string> failed_masks;    // proposals whose evidence failed
};

// Systematic-scan Gibbs sampler over inclusion indicators; sweeps parameters
// in ascending order and covariates within each formula in ascending order.
// Each update computes the Laplace evidence of the flipped mask (cache
// first), warm-starting the MAP from the current mask's MAP.
SelectionResult gibbs_select(const SurvivalDataset& data, const ModelSpec& spec,
                             const PriorSpec& priors, const InclusionMask& init_mask,
                             const SelectOptions& opts);

// Strict thresholding of marginal inclusion probabilities at 1/2.
InclusionMask median_model(const Eigen::MatrixXd& inclusion_probs);

// Softmax of log evidence + log complexity prior over the visited models.
std::map<std::string, double> model_posterior_probs(const ModelCache& cache, double complexity_C,
                                                    int d_tilde);

}  // namespace survode
