#include "trail/evaluation.hpp"

#include "trail/baselines.hpp"
#include "trail/data.hpp"
#include "trail/policy.hpp"
#include "trail/reparam.hpp"
#include "trail/theory.hpp"

#include <cmath>
#include <numeric>

namespace trail {

Summary summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw ValidationError("summarize: no values");
  Summary out;
  const double n = static_cast<double>(xs.size());
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double var = 0.0;
    for (double x : xs) var += (x - out.mean) * (x - out.mean);
    out.stderr_mean = std::sqrt(var / (n - 1.0) / n);
  }
  return out;
}

TabularPolicy optimal_expert(const Gridworld& world, double tol) {
  const Matrix q = q_values(world.mdp, world.reward, 1e-12);
  Matrix probs = Matrix::Zero(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double best = q.row(s).maxCoeff();
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      if (q(s, a) >= best - tol) probs(s, a) = 1.0;
    }
    probs.row(s) /= probs.row(s).sum();
  }
  return TabularPolicy(std::move(probs), 1e-9);
}

TabularPolicy soft_expert(const Gridworld& world, double eps) {
  if (eps < 0.0 || eps > 1.0) throw ValidationError("soft_expert: eps must lie in [0, 1]");
  const TabularPolicy greedy = optimal_expert(world);
  const double uniform = 1.0 / greedy.n_actions();
  return TabularPolicy(((1.0 - eps) * greedy.probs().array() + eps * uniform).matrix(), 1e-9);
}

RolloutStats rollout_tabular(const TabularMdp& mdp, const TabularPolicy& policy, int goal_state, int episodes,
                             int horizon, std::uint64_t seed) {
  if (episodes <= 0 || horizon <= 0) throw ValidationError("rollout: episodes and horizon must be positive");
  require_dims(policy.n_states() == mdp.n_states() && policy.n_actions() == mdp.n_actions(),
               "rollout: policy shape does not match the MDP");
  RolloutStats stats;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng(derive_seed(seed, 0x726f6c, static_cast<std::uint64_t>(ep)));
    int s = rng.categorical(mdp.initial());
    for (int t = 0; t <= horizon; ++t) {
      if (s == goal_state) {
        stats.success_rate += 1.0;
        stats.mean_return += std::pow(mdp.gamma(), t);
        break;
      }
      if (t == horizon) break;
      const int a = rng.categorical(policy.probs().row(s).transpose());
      s = rng.categorical(mdp.row(s, a).transpose());
    }
  }
  stats.success_rate /= episodes;
  stats.mean_return /= episodes;
  return stats;
}

RolloutStats rollout_point_mass(const PointMassEnv& env, const ContinuousPolicyFn& policy, int episodes, int horizon,
                                std::uint64_t seed, double gamma) {
  if (episodes <= 0 || horizon <= 0) throw ValidationError("rollout: episodes and horizon must be positive");
  RolloutStats stats;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng(derive_seed(seed, 0x726f70, static_cast<std::uint64_t>(ep)));
    Eigen::Vector2d s(rng.uniform(env.lo, env.hi), rng.uniform(env.lo, env.hi));
    for (int t = 0; t <= horizon; ++t) {
      if ((s - env.goal).norm() <= env.goal_radius) {
        stats.success_rate += 1.0;
        stats.mean_return += std::pow(gamma, t);
        break;
      }
      if (t == horizon) break;
      s = point_mass_step(s, policy(s, rng), env, rng);
    }
  }
  stats.success_rate /= episodes;
  stats.mean_return /= episodes;
  return stats;
}

HeadlineResult run_headline(const HeadlineConfig& cfg) {
  if (cfg.seeds <= 0) throw ValidationError("headline: seeds must be positive");
  const Gridworld world = build_redundant_gridworld(default_grid_spec(cfg.redundancy, cfg.slip_prob));
  const TabularPolicy expert = optimal_expert(world);
  const DistVector d_off = DistVector::uniform(world.mdp.n_states());

  HeadlineResult result;
  std::vector<double> trail_success;
  std::vector<double> bc_success;
  for (int k = 0; k < cfg.seeds; ++k) {
    const auto seed = derive_seed(cfg.seed, 0x68656164, static_cast<std::uint64_t>(k));
    const OfflineDataset offline = generate_offline(world.mdp, d_off, cfg.m_offline, derive_seed(seed, 1));
    const ExpertDataset demos = generate_expert(world.mdp, expert, cfg.n_expert, derive_seed(seed, 2));

    const Matrix rows = empirical_transitions(offline);
    const Reparametrization rep =
        tabular_reparametrize(rows, world.mdp.n_states(), world.mdp.n_actions(), d_off, cfg.n_latent, seed);
    const TabularDecoder decoder = train_action_decoder(offline, rep.phi);
    const TabularLatent latent = tabular_latent_bc(demos, rep.phi, cfg.n_latent, cfg.prior_count);
    const TabularPolicy trail_policy = compose_policy(latent, decoder);
    const TabularPolicy bc_policy = vanilla_bc(demos, cfg.prior_count);

    HeadlineSeed row;
    row.j_t = rep.j_t;  // against the empirical rows; the true rows may put mass where T_Z has none
    const auto eval_seed = derive_seed(seed, 3);
    row.trail_success =
        rollout_tabular(world.mdp, trail_policy, world.goal_state, cfg.episodes, cfg.horizon, eval_seed).success_rate;
    row.bc_success =
        rollout_tabular(world.mdp, bc_policy, world.goal_state, cfg.episodes, cfg.horizon, eval_seed).success_rate;
    trail_success.push_back(row.trail_success);
    bc_success.push_back(row.bc_success);
    result.per_seed.push_back(row);
  }
  result.trail = summarize(trail_success);
  result.bc = summarize(bc_success);
  return result;
}

GroupDistances group_distances(const EnergyModel& model, const Gridworld& world) {
  const int nS = world.mdp.n_states();
  const int nA = world.mdp.n_actions();
  std::vector<int> states;
  std::vector<int> actions;
  for (int s = 0; s < nS; ++s) {
    if (s == world.goal_state) continue;
    for (int a = 0; a < nA; ++a) {
      states.push_back(s);
      actions.push_back(a);
    }
  }
  const Matrix emb = model.phi.forward(model.features.encode_state_actions(states, actions));
  double within = 0.0;
  double across = 0.0;
  long n_within = 0;
  long n_across = 0;
  for (std::size_t block = 0; block < states.size(); block += static_cast<std::size_t>(nA)) {
    const int s = states[block];
    for (int a = 0; a < nA; ++a) {
      for (int b = a + 1; b < nA; ++b) {
        const double dist = (emb.col(static_cast<Eigen::Index>(block) + a) - emb.col(static_cast<Eigen::Index>(block) + b)).norm();
        if (world.phi_star(s, a) == world.phi_star(s, b)) {
          within += dist;
          ++n_within;
        } else {
          across += dist;
          ++n_across;
        }
      }
    }
  }
  GroupDistances out;
  if (n_within > 0) out.within = within / static_cast<double>(n_within);
  if (n_across > 0) out.across = across / static_cast<double>(n_across);
  return out;
}

}  // namespace trail
