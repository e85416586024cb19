#pragma once

#include "trail/data.hpp"
#include "trail/mdp.hpp"
#include "trail/nn.hpp"

namespace trail {

/// pi(a|s) = (count(s, a) + prior) / (count(s) + |A| prior); states without data (and prior 0) are uniform.
TabularPolicy vanilla_bc(const ExpertDataset& expert, double prior_count = 0.0);

struct BcConfig {
  std::vector<int> hidden{256, 256};
  int steps = 1000;
  int batch = 64;
  double lr = 3e-4;
  std::uint64_t seed = 0;
};

/// Diagonal Gaussian over raw actions given the state; network output is [mean; log_std].
struct GaussianBcPolicy {
  int state_dim = 0;
  int action_dim = 0;
  Mlp net;

  Vector act(const Vector& state, Rng& rng, bool sample = true) const;
};

/// Adam on the Gaussian negative log-likelihood of the expert actions.
GaussianBcPolicy vanilla_bc(const ContinuousExpertDataset& expert, const BcConfig& cfg);

}  // namespace trail
