#pragma once

#include "trail/mdp.hpp"
#include "trail/random.hpp"

#include <vector>

namespace trail {

/// Deterministic map (s, a) -> latent index z in [0, n_latent).
struct LatentMap {
  int n_latent = 0;
  IndexMatrix table;  // |S| x |A|

  int n_states() const { return static_cast<int>(table.rows()); }
  int n_actions() const { return static_cast<int>(table.cols()); }
  int operator()(int s, int a) const { return table(s, a); }

  static LatentMap identity(int n_states, int n_actions);
};

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Gridworld whose four cardinal moves are each duplicated into `redundancy` raw actions.
/// Raw action a moves in direction a mod 4 (0 up, 1 right, 2 down, 3 left).
struct GridSpec {
  int width = 5;
  int height = 5;
  std::vector<Cell> walls;
  Cell goal{4, 4};
  double slip_prob = 0.1;
  int redundancy = 1;
  double gamma = 0.95;

  int n_actions() const { return 4 * redundancy; }
  void validate() const;
};

struct Gridworld {
  GridSpec spec;
  TabularMdp mdp;
  LatentMap phi_star;       // ground truth a -> a mod 4
  Matrix reward;            // 1 at the goal; only used to synthesize experts
  std::vector<Cell> cells;  // state index -> cell
  int goal_state = 0;

  int state_of(Cell c) const;
};

/// Builds the slip gridworld. The initial distribution is uniform over non-goal free cells.
Gridworld build_redundant_gridworld(const GridSpec& spec);

/// Spec with a 5x5 board, two interior walls and the goal in the far corner (23 free cells).
GridSpec default_grid_spec(int redundancy = 16, double slip_prob = 0.1, double gamma = 0.95);

/// Planar point mass driven by a D-dimensional raw action through a fixed 2 x D mixing map.
struct PointMassEnv {
  int action_dim = 4;
  Matrix mixing;  // 2 x D, rows of unit norm
  double dt = 0.1;
  double noise_std = 0.0;
  double lo = -1.0;
  double hi = 1.0;
  Eigen::Vector2d goal{0.7, 0.7};
  double goal_radius = 0.15;

  void validate() const;
};

/// Random mixing with unit-norm rows and rank 2, drawn from `seed`.
PointMassEnv make_point_mass(int action_dim, std::uint64_t seed, double dt = 0.1, double noise_std = 0.01);

/// next = clip(state + dt * mixing * action + noise), noise ~ N(0, noise_std^2 I).
Eigen::Vector2d point_mass_step(const Eigen::Vector2d& state, const Vector& action, const PointMassEnv& env, Rng& rng);

/// Minimum-norm raw action steering toward the goal, plus optional null-space jitter.
Vector point_mass_expert_action(const Eigen::Vector2d& state, const PointMassEnv& env, Rng& rng, double jitter = 0.0);

}  // namespace trail
