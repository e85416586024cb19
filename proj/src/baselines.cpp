#include "trail/baselines.hpp"

#include "trail/policy.hpp"

#include <algorithm>

namespace trail {

TabularPolicy vanilla_bc(const ExpertDataset& expert, double prior_count) {
  if (expert.pairs.empty()) throw EmptyDatasetError("vanilla_bc: expert dataset is empty");
  if (prior_count < 0.0) throw ValidationError("vanilla_bc: prior_count must be nonnegative");
  Matrix counts = Matrix::Constant(expert.n_states, expert.n_actions, prior_count);
  for (const auto& p : expert.pairs) counts(p.s, p.a) += 1.0;
  for (int s = 0; s < expert.n_states; ++s) {
    const double total = counts.row(s).sum();
    if (total > 0.0) {
      counts.row(s) /= total;
    } else {
      counts.row(s).setConstant(1.0 / expert.n_actions);
    }
  }
  return TabularPolicy(std::move(counts), 1e-9);
}

Vector GaussianBcPolicy::act(const Vector& state, Rng& rng, bool sample) const {
  require_dims(state.size() == state_dim, "GaussianBcPolicy: state has the wrong dimension");
  const Vector out = net.forward(state);
  Vector a = out.head(action_dim);
  if (!sample) return a;
  for (int j = 0; j < action_dim; ++j) {
    a(j) += std::exp(std::clamp(out(action_dim + j), kLogStdMin, kLogStdMax)) * rng.normal();
  }
  return a;
}

GaussianBcPolicy vanilla_bc(const ContinuousExpertDataset& expert, const BcConfig& cfg) {
  if (expert.size() == 0) throw EmptyDatasetError("vanilla_bc: expert dataset is empty");
  // Same estimator as a Gaussian latent policy whose "latent" is the raw action.
  LatentConfig lc;
  lc.hidden = cfg.hidden;
  lc.steps = cfg.steps;
  lc.batch = cfg.batch;
  lc.lr = cfg.lr;
  lc.seed = derive_seed(cfg.seed, 0x6263);
  GaussianLatent fit = train_gaussian_latent(expert.states, expert.actions, lc);
  return GaussianBcPolicy{static_cast<int>(expert.states.rows()), fit.latent_dim, std::move(fit.net)};
}

}  // namespace trail
