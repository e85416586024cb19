#include "trail/envs.hpp"

#include <algorithm>

namespace trail {

LatentMap LatentMap::identity(int n_states, int n_actions) {
  LatentMap phi;
  phi.n_latent = n_actions;
  phi.table.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) phi.table(s, a) = a;
  }
  return phi;
}

namespace {

bool in_bounds(const GridSpec& spec, Cell c) { return c.x >= 0 && c.y >= 0 && c.x < spec.width && c.y < spec.height; }

bool is_wall(const GridSpec& spec, Cell c) {
  return std::find(spec.walls.begin(), spec.walls.end(), c) != spec.walls.end();
}

constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {1, 0, -1, 0};

}  // namespace

void GridSpec::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("GridSpec: width and height must be positive");
  if (redundancy <= 0) throw ValidationError("GridSpec: redundancy must be positive");
  if (!(slip_prob >= 0.0 && slip_prob < 1.0)) throw ValidationError("GridSpec: slip_prob must lie in [0, 1)");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("GridSpec: gamma must lie in [0, 1)");
  if (!in_bounds(*this, goal)) throw ValidationError("GridSpec: goal outside the grid");
  for (const Cell& w : walls) {
    if (!in_bounds(*this, w)) throw ValidationError("GridSpec: wall outside the grid");
  }
  if (is_wall(*this, goal)) throw ValidationError("GridSpec: goal is a wall");
}

int Gridworld::state_of(Cell c) const {
  const auto it = std::find(cells.begin(), cells.end(), c);
  if (it == cells.end()) throw ValidationError("Gridworld: cell is not a free cell");
  return static_cast<int>(it - cells.begin());
}

Gridworld build_redundant_gridworld(const GridSpec& spec) {
  spec.validate();
  Gridworld world;
  world.spec = spec;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Cell c{x, y};
      if (!is_wall(spec, c)) world.cells.push_back(c);
    }
  }
  const int ns = static_cast<int>(world.cells.size());
  const int na = spec.n_actions();
  world.goal_state = world.state_of(spec.goal);

  auto move = [&](int s, int dir) {
    const Cell from = world.cells[s];
    const Cell to{from.x + kDx[dir], from.y + kDy[dir]};
    if (!in_bounds(spec, to) || is_wall(spec, to)) return s;
    return world.state_of(to);
  };

  // Rows are computed once per direction and copied, so duplicates are bitwise identical.
  Matrix per_direction = Matrix::Zero(static_cast<Eigen::Index>(ns) * 4, ns);
  for (int s = 0; s < ns; ++s) {
    for (int dir = 0; dir < 4; ++dir) {
      auto row = per_direction.row(static_cast<Eigen::Index>(s) * 4 + dir);
      if (s == world.goal_state) {
        row(s) = 1.0;
        continue;
      }
      row(move(s, dir)) += 1.0 - spec.slip_prob;
      for (int other = 0; other < 4; ++other) row(move(s, other)) += spec.slip_prob / 4.0;
    }
  }
  Matrix transition(static_cast<Eigen::Index>(ns) * na, ns);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      transition.row(static_cast<Eigen::Index>(s) * na + a) = per_direction.row(static_cast<Eigen::Index>(s) * 4 + a % 4);
    }
  }

  Vector initial = Vector::Zero(ns);
  for (int s = 0; s < ns; ++s) {
    if (s != world.goal_state || ns == 1) initial(s) = 1.0;
  }
  initial /= initial.sum();

  world.mdp = TabularMdp(ns, na, std::move(transition), std::move(initial), spec.gamma);
  world.phi_star.n_latent = 4;
  world.phi_star.table.resize(ns, na);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) world.phi_star.table(s, a) = a % 4;
  }
  world.reward = Matrix::Zero(ns, na);
  world.reward.row(world.goal_state).setOnes();
  return world;
}

GridSpec default_grid_spec(int redundancy, double slip_prob, double gamma) {
  GridSpec spec;
  spec.width = 5;
  spec.height = 5;
  spec.walls = {{1, 1}, {3, 3}};
  spec.goal = {4, 4};
  spec.slip_prob = slip_prob;
  spec.redundancy = redundancy;
  spec.gamma = gamma;
  return spec;
}

void PointMassEnv::validate() const {
  if (action_dim < 2) throw ValidationError("PointMassEnv: action_dim must be at least 2");
  require_dims(mixing.rows() == 2 && mixing.cols() == action_dim, "PointMassEnv: mixing must be 2 x action_dim");
  if (!(noise_std >= 0.0)) throw ValidationError("PointMassEnv: noise_std must be nonnegative");
  if (!(lo < hi)) throw ValidationError("PointMassEnv: empty bounds");
  Eigen::FullPivLU<Matrix> lu(mixing);
  if (lu.rank() != 2) throw ValidationError("PointMassEnv: mixing must have rank 2");
}

PointMassEnv make_point_mass(int action_dim, std::uint64_t seed, double dt, double noise_std) {
  PointMassEnv env;
  env.action_dim = action_dim;
  env.dt = dt;
  env.noise_std = noise_std;
  Rng rng(derive_seed(seed, 0x6d6978));
  for (;;) {
    env.mixing.resize(2, action_dim);
    for (int r = 0; r < 2; ++r) {
      Vector row = rng.normal_vector(action_dim);
      env.mixing.row(r) = row.transpose() / row.norm();
    }
    Eigen::FullPivLU<Matrix> lu(env.mixing);
    if (lu.rank() == 2) break;
  }
  env.validate();
  return env;
}

Eigen::Vector2d point_mass_step(const Eigen::Vector2d& state, const Vector& action, const PointMassEnv& env, Rng& rng) {
  require_dims(action.size() == env.action_dim, "point_mass_step: action has wrong dimension");
  if (!state.allFinite() || !action.allFinite()) throw NonFiniteError("point_mass_step: non-finite state or action");
  Eigen::Vector2d next = state + env.dt * (env.mixing * action);
  if (env.noise_std > 0.0) {
    next(0) += env.noise_std * rng.normal();
    next(1) += env.noise_std * rng.normal();
  }
  return next.cwiseMax(env.lo).cwiseMin(env.hi);
}

Vector point_mass_expert_action(const Eigen::Vector2d& state, const PointMassEnv& env, Rng& rng, double jitter) {
  Eigen::Vector2d velocity = (env.goal - state) / env.dt;
  const double speed = velocity.norm();
  if (speed > 1.0) velocity /= speed;
  const Matrix pinv = env.mixing.transpose() * (env.mixing * env.mixing.transpose()).inverse();
  Vector action = pinv * velocity;
  if (jitter > 0.0) {
    const Matrix null_proj = Matrix::Identity(env.action_dim, env.action_dim) - pinv * env.mixing;
    action += jitter * (null_proj * rng.normal_vector(env.action_dim));
  }
  return action;
}

}  // namespace trail
