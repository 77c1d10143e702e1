#include "survode/varselect.hpp"

#include <cmath>

#include "survode/math.hpp"

namespace survode {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

const ModelCache::Entry* ModelCache::find(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void ModelCache::put(const std::string& key, Entry entry) {
  std::unique_lock lock(mu_);
  entries_.emplace(key, std::move(entry));
}

std::size_t ModelCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::map<std::string, ModelCache::Entry> ModelCache::snapshot() const {
  std::shared_lock lock(mu_);
  return {entries_.begin(), entries_.end()};
}

double flip_probability(double log_ev_new, double log_prior_new, double log_ev_old,
                        double log_prior_old) {
  const double snew = log_ev_new + log_prior_new;
  const double sold = log_ev_old + log_prior_old;
  if (snew == kNegInf && sold == kNegInf)
    throw NumericError("flip probability undefined: both models have -inf score");
  if (snew == kNegInf) return 0.0;
  if (sold == kNegInf) return 1.0;
  return logistic(snew - sold);
}

namespace {

// Evidence of a mask via MAP + Laplace; the warm start copies coordinates
// shared with the current model and zeroes new ones.
ModelCache::Entry evaluate_mask(const SurvivalDataset& data, const ModelSpec& spec,
                                const PriorSpec& priors, const InclusionMask& mask,
                                const ParamLayout& warm_layout, const Eigen::VectorXd& warm_map,
                                const SelectOptions& opts) {
  ModelCache::Entry entry;
  try {
    PosteriorModel model(data, spec, mask, priors, opts.solver);
    const ParamLayout& layout = model.layout();
    Eigen::VectorXd init = Eigen::VectorXd::Zero(layout.dim);
    if (warm_map.size() > 0) {
      for (std::size_t k = 0; k < layout.blocks.size(); ++k) {
        init[layout.blocks[k].intercept] = warm_map[warm_layout.blocks[k].intercept];
        for (const auto& [col, idx] : layout.blocks[k].coefs) {
          for (const auto& [wcol, widx] : warm_layout.blocks[k].coefs)
            if (wcol == col) init[idx] = warm_map[widx];
        }
      }
      if (layout.logh0 >= 0 && warm_layout.logh0 >= 0)
        init[layout.logh0] = warm_map[warm_layout.logh0];
    }
    const FitResult fit = find_map(model, init, opts.optim);
    entry.log_evidence = laplace_log_evidence(fit);
    entry.map = fit.map;
    entry.ok = true;
  } catch (const NumericError&) {
    entry.ok = false;
    entry.log_evidence = kNegInf;
  }
  return entry;
}

}  // namespace

SelectionResult gibbs_select(const SurvivalDataset& data, const ModelSpec& spec,
                             const PriorSpec& priors, const InclusionMask& init_mask,
                             const SelectOptions& opts) {
  if (opts.n_iter <= opts.burn_in)
    throw std::invalid_argument("gibbs_select needs n_iter > burn_in");
  const int d = spec.n_ode_params();
  const int p = data.p();
  const int d_tilde = spec.candidate_count();

  SelectionResult res;
  res.cache = std::make_shared<ModelCache>();
  auto rng = make_engine(opts.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  InclusionMask current = init_mask;
  ParamLayout current_layout = ParamLayout::make(spec, current);
  Eigen::VectorXd current_map;  // empty until the first evaluation

  auto evidence_of = [&](const InclusionMask& mask) -> const ModelCache::Entry* {
    const std::string key = mask.key();
    if (const auto* hit = res.cache->find(key)) return hit;
    ModelCache::Entry entry =
        evaluate_mask(data, spec, priors, mask, current_layout, current_map, opts);
    if (!entry.ok) res.failed_masks.push_back(key);
    res.cache->put(key, std::move(entry));
    return res.cache->find(key);
  };

  {
    const auto* e0 = evidence_of(current);
    current_map = e0->map;
  }

  Eigen::MatrixXd incl_sum = Eigen::MatrixXd::Zero(d, p);
  int recorded = 0;

  for (int iter = 0; iter < opts.n_iter; ++iter) {
    for (int k = 0; k < d; ++k) {
      for (int col : spec.formulas[k]) {
        const auto* cur = evidence_of(current);
        InclusionMask proposal = current;
        proposal.bits[k][col] = 1 - proposal.bits[k][col];
        const auto* prop = evidence_of(proposal);

        const double P = flip_probability(
            prop->log_evidence, log_complexity_prior(proposal, priors.complexity_C, d_tilde),
            cur->log_evidence, log_complexity_prior(current, priors.complexity_C, d_tilde));
        if (unif(rng) < P) {
          current = std::move(proposal);
          current_layout = ParamLayout::make(spec, current);
          if (prop->ok) current_map = prop->map;
        }
      }
    }
    if (iter >= opts.burn_in) {
      ++recorded;
      res.visit_counts[current.key()] += 1;
      for (int k = 0; k < d; ++k)
        for (int j = 0; j < p; ++j) incl_sum(k, j) += current.bits[k][j];
    }
  }

  res.inclusion_probs = incl_sum / std::max(1, recorded);
  res.median = median_model(res.inclusion_probs);
  return res;
}

InclusionMask median_model(const Eigen::MatrixXd& inclusion_probs) {
  InclusionMask m = InclusionMask::empty(static_cast<int>(inclusion_probs.rows()),
                                         static_cast<int>(inclusion_probs.cols()));
  for (int k = 0; k < inclusion_probs.rows(); ++k)
    for (int j = 0; j < inclusion_probs.cols(); ++j)
      if (inclusion_probs(k, j) > 0.5) m.bits[k][j] = 1;
  return m;
}

std::map<std::string, double> model_posterior_probs(const ModelCache& cache, double complexity_C,
                                                    int d_tilde) {
  const auto entries = cache.snapshot();
  if (entries.empty()) throw std::invalid_argument("empty model cache");
  std::map<std::string, double> scores;
  double best = kNegInf;
  for (const auto& [key, entry] : entries) {
    const InclusionMask mask = InclusionMask::parse(key);
    const double s = entry.log_evidence + log_complexity_prior(mask, complexity_C, d_tilde);
    scores[key] = s;
    best = std::max(best, s);
  }
  double total = 0.0;
  for (auto& [key, s] : scores) {
    s = (s == kNegInf) ? 0.0 : std::exp(s - best);
    total += s;
  }
  for (auto& [key, s] : scores) s /= total;
  return scores;
}

}  // namespace survode
