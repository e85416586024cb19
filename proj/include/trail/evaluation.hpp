#pragma once

#include "trail/ebm.hpp"
#include "trail/envs.hpp"
#include "trail/mdp.hpp"

#include <functional>
#include <vector>

namespace trail {

struct Summary {
  double mean = 0.0;
  double stderr_mean = 0.0;
};

Summary summarize(const std::vector<double>& xs);

/// Uniform over the greedy action set of the optimal Q function (duplicates included).
TabularPolicy optimal_expert(const Gridworld& world, double tol = 1e-9);

/// (1 - eps) * optimal_expert + eps * uniform.
TabularPolicy soft_expert(const Gridworld& world, double eps);

struct RolloutStats {
  double success_rate = 0.0;
  double mean_return = 0.0;  // discounted goal reward gamma^t at the first goal visit
};

/// Episodes start from the MDP's initial distribution and succeed when `goal_state` is reached within `horizon` steps.
RolloutStats rollout_tabular(const TabularMdp& mdp, const TabularPolicy& policy, int goal_state, int episodes,
                             int horizon, std::uint64_t seed);

using ContinuousPolicyFn = std::function<Vector(const Eigen::Vector2d&, Rng&)>;

/// Point-mass episodes from uniform start states; success is entering the goal disc within `horizon` steps.
RolloutStats rollout_point_mass(const PointMassEnv& env, const ContinuousPolicyFn& policy, int episodes, int horizon,
                                std::uint64_t seed, double gamma = 0.99);

/// Tabular TRAIL against vanilla BC on the redundant gridworld.
struct HeadlineConfig {
  int redundancy = 16;
  double slip_prob = 0.1;
  std::size_t n_expert = 50;
  std::size_t m_offline = 50000;
  int n_latent = 4;
  int seeds = 10;
  int episodes = 10;
  int horizon = 20;
  double prior_count = 0.0;  // shared Laplace prior for both imitation estimators
  std::uint64_t seed = 0;
};

struct HeadlineSeed {
  double trail_success = 0.0;
  double bc_success = 0.0;
  double j_t = 0.0;
};

struct HeadlineResult {
  std::vector<HeadlineSeed> per_seed;
  Summary trail;
  Summary bc;

  double ratio() const { return bc.mean > 0.0 ? trail.mean / bc.mean : (trail.mean > 0.0 ? INFINITY : 1.0); }
};

HeadlineResult run_headline(const HeadlineConfig& cfg);

/// Mean embedding distance between duplicate actions at the same state versus actions from different groups.
struct GroupDistances {
  double within = 0.0;
  double across = 0.0;

  double ratio() const { return within / across; }
};

GroupDistances group_distances(const EnergyModel& model, const Gridworld& world);

}  // namespace trail
