#include "trail/envs.hpp"
#include "trail/evaluation.hpp"
#include "trail/reparam.hpp"

#include <doctest.h>

using namespace trail;

TEST_CASE("smallest gridworld") {
  GridSpec spec;
  spec.width = 2;
  spec.height = 1;
  spec.goal = {1, 0};
  spec.slip_prob = 0.0;
  spec.redundancy = 1;
  auto world = build_redundant_gridworld(spec);
  CHECK(world.mdp.n_states() == 2);
  CHECK(world.mdp.n_actions() == 4);
  CHECK(world.mdp.prob(0, 1, 1) == 1.0);  // right
  CHECK(world.mdp.prob(0, 3, 0) == 1.0);  // left into the border stays
  CHECK(world.mdp.prob(1, 3, 1) == 1.0);  // goal absorbs
}

TEST_CASE("slip dynamics by hand") {
  GridSpec spec;
  spec.width = 3;
  spec.height = 1;
  spec.goal = {2, 0};
  spec.slip_prob = 0.2;
  auto world = build_redundant_gridworld(spec);
  // From the middle cell moving right: 0.8 + 0.05 to the right, 0.05 left, 0.1 blocked up/down.
  CHECK(world.mdp.prob(1, 1, 2) == doctest::Approx(0.85));
  CHECK(world.mdp.prob(1, 1, 0) == doctest::Approx(0.05));
  CHECK(world.mdp.prob(1, 1, 1) == doctest::Approx(0.10));
}

TEST_CASE("redundant actions share rows bitwise") {
  auto world = build_redundant_gridworld(default_grid_spec(16, 0.1));
  CHECK(world.mdp.n_states() == 23);
  CHECK(world.mdp.n_actions() == 64);
  for (int s = 0; s < 23; ++s)
    for (int a = 0; a + 4 < 64; ++a) CHECK((world.mdp.row(s, a).array() == world.mdp.row(s, a + 4).array()).all());

  // Group means reproduce every row with zero error. Pairwise halving keeps the mean of 16 equal rows exact.
  for (int s = 0; s < 23; ++s) {
    for (int g = 0; g < 4; ++g) {
      std::vector<Vector> level;
      for (int a = g; a < 64; a += 4) level.push_back(world.mdp.row(s, a).transpose());
      while (level.size() > 1) {
        std::vector<Vector> next;
        for (std::size_t i = 0; i < level.size(); i += 2) next.push_back(0.5 * (level[i] + level[i + 1]));
        level = next;
      }
      const Vector mean = level.front();
      for (int a = g; a < 64; a += 4) CHECK((world.mdp.row(s, a).transpose() - mean).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  // J_T of the ground-truth factorization, T_Z taken from the first action of each group.
  Matrix t_z(23 * 4, 23);
  for (int s = 0; s < 23; ++s)
    for (int z = 0; z < 4; ++z) t_z.row(s * 4 + z) = world.mdp.row(s, z);
  CHECK(transition_representation_error(world.mdp.transition(), world.mdp.initial(), world.phi_star, t_z) == 0.0);
}

TEST_CASE("spec validation") {
  GridSpec spec = default_grid_spec();
  spec.walls.push_back(spec.goal);
  CHECK_THROWS_AS(build_redundant_gridworld(spec), ValidationError);
  spec = default_grid_spec();
  spec.slip_prob = 1.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = default_grid_spec();
  spec.redundancy = 0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("noiseless expert reaches the goal from every cell") {
  auto spec = default_grid_spec(1, 0.0);
  auto world = build_redundant_gridworld(spec);
  auto pi = value_iteration(world.mdp, world.reward, 1e-12);
  for (int s0 = 0; s0 < world.mdp.n_states(); ++s0) {
    int s = s0;
    int steps = 0;
    while (s != world.goal_state && steps < spec.width + spec.height) {
      int a = 0;
      pi.probs().row(s).maxCoeff(&a);
      world.mdp.row(s, a).maxCoeff(&s);
      ++steps;
    }
    CHECK(s == world.goal_state);
  }
}

TEST_CASE("point mass step") {
  Rng rng(1);
  auto env = make_point_mass(4, 3, 0.1, 0.0);
  Eigen::Vector2d x(0.2, -0.3);
  CHECK(point_mass_step(x, Vector::Zero(4), env, rng) == x);

  // Two actions differing by a null-space direction land in the same place.
  Eigen::JacobiSVD<Matrix> svd(env.mixing, Eigen::ComputeFullV);
  const Vector null_dir = svd.matrixV().col(3);
  const Vector a = rng.normal_vector(4) * 0.3;
  const Eigen::Vector2d n1 = point_mass_step(x, a, env, rng);
  const Eigen::Vector2d n2 = point_mass_step(x, a + null_dir, env, rng);
  CHECK((n1 - n2).norm() <= 1e-12);

  PointMassEnv canon;
  canon.action_dim = 3;
  canon.mixing = Matrix::Zero(2, 3);
  canon.mixing(0, 0) = 1.0;
  canon.mixing(1, 1) = 1.0;
  canon.dt = 1.0;
  canon.lo = -5.0;
  canon.hi = 5.0;
  canon.validate();
  Vector e1 = Vector::Zero(3);
  e1(0) = 1.0;
  const Eigen::Vector2d moved = point_mass_step(x, e1, canon, rng);
  CHECK(moved(0) == doctest::Approx(1.2));
  CHECK(moved(1) == doctest::Approx(-0.3));

  Vector bad = Vector::Zero(4);
  bad(0) = NAN;
  CHECK_THROWS_AS(point_mass_step(x, bad, env, rng), NonFiniteError);
}

TEST_CASE("point mass expert moves toward the goal") {
  Rng rng(2);
  auto env = make_point_mass(6, 9, 0.1, 0.0);
  Eigen::Vector2d x(-0.8, -0.5);
  const double before = (env.goal - x).norm();
  const Vector a = point_mass_expert_action(x, env, rng, 0.3);
  const Vector a0 = point_mass_expert_action(x, env, rng, 0.0);
  // Jitter lives in the null space of the mixing map.
  CHECK((env.mixing * (a - a0)).norm() <= 1e-10);
  CHECK((env.goal - point_mass_step(x, a, env, rng)).norm() < before);
}
