#include "trail/evaluation.hpp"
#include "trail/theory.hpp"

#include <doctest.h>

using namespace trail;

TEST_CASE("summary statistics") {
  const auto s = summarize({1.0, 2.0, 3.0, 6.0});
  CHECK(s.mean == 3.0);
  // sample variance 14/3, stderr sqrt(14/3/4)
  CHECK(s.stderr_mean == doctest::Approx(std::sqrt(14.0 / 12.0)));
  CHECK(summarize({2.0}).stderr_mean == 0.0);
  CHECK_THROWS_AS(summarize({}), ValidationError);
}

TEST_CASE("experts") {
  auto world = build_redundant_gridworld(default_grid_spec(2, 0.1));
  const auto pi = optimal_expert(world);
  const Matrix q = q_values(world.mdp, world.reward, 1e-12);
  for (int s = 0; s < world.mdp.n_states(); ++s) {
    const double best = q.row(s).maxCoeff();
    int count = 0;
    for (int a = 0; a < 8; ++a) count += q(s, a) >= best - 1e-9;
    CHECK(count % 2 == 0);  // duplicates tie
    for (int a = 0; a < 8; ++a) CHECK(pi(s, a) == doctest::Approx(q(s, a) >= best - 1e-9 ? 1.0 / count : 0.0));
  }
  const auto soft = soft_expert(world, 0.5);
  CHECK(soft(0, 0) == doctest::Approx(0.5 * pi(0, 0) + 0.5 / 8));
  CHECK_THROWS_AS(soft_expert(world, 1.5), ValidationError);
}

TEST_CASE("tabular rollouts") {
  GridSpec spec;
  spec.width = 3;
  spec.height = 1;
  spec.goal = {2, 0};
  spec.slip_prob = 0.0;
  auto world = build_redundant_gridworld(spec);
  Eigen::VectorXi right(3);
  right << 1, 1, 1;
  const auto go = TabularPolicy::deterministic(right, 4);
  // Starts are uniform over cells 0 and 1: goal reached at t = 2 or t = 1.
  const auto stats = rollout_tabular(world.mdp, go, world.goal_state, 400, 5, 1);
  CHECK(stats.success_rate == 1.0);
  const double g = spec.gamma;
  CHECK(stats.mean_return >= g * g - 1e-12);
  CHECK(stats.mean_return <= g + 1e-12);
  Eigen::VectorXi left(3);
  left << 3, 3, 3;
  CHECK(rollout_tabular(world.mdp, TabularPolicy::deterministic(left, 4), world.goal_state, 50, 5, 1).success_rate ==
        0.0);
  CHECK(rollout_tabular(world.mdp, go, world.goal_state, 1, 1, 7).success_rate ==
        rollout_tabular(world.mdp, go, world.goal_state, 1, 1, 7).success_rate);
}

TEST_CASE("point mass rollouts") {
  auto env = make_point_mass(4, 2, 0.1, 0.0);
  ContinuousPolicyFn expert = [&](const Eigen::Vector2d& s, Rng& rng) { return point_mass_expert_action(s, env, rng); };
  CHECK(rollout_point_mass(env, expert, 20, 60, 3).success_rate == 1.0);
  ContinuousPolicyFn idle = [&](const Eigen::Vector2d&, Rng&) { return Vector::Zero(4).eval(); };
  CHECK(rollout_point_mass(env, idle, 20, 60, 3).success_rate < 0.2);
}

TEST_CASE("group distances of a hand-built embedding") {
  auto world = build_redundant_gridworld(default_grid_spec(4, 0.1));
  Rng rng(1);
  const auto features = FeatureSpec::for_tabular(world.mdp.n_states(), 16);
  auto model = EnergyModel::create(features, 2, {}, rng);
  Matrix w = Matrix::Zero(2, features.sa_input_dim());
  for (int a = 0; a < 16; ++a) w.col(world.mdp.n_states() + a) << (a % 4 == 1) - (a % 4 == 3), (a % 4 == 0) - (a % 4 == 2);
  model.phi.weights()[0] = w;
  model.phi.biases()[0].setZero();
  const auto g = group_distances(model, world);
  CHECK(g.within == 0.0);
  // Across pairs: 2/3 adjacent directions at distance sqrt 2, 1/3 opposite at distance 2.
  CHECK(g.across == doctest::Approx((2.0 * std::sqrt(2.0) + 2.0) / 3.0));
}

TEST_CASE("headline protocol is deterministic") {
  HeadlineConfig cfg;
  cfg.redundancy = 4;
  cfg.m_offline = 2000;
  cfg.seeds = 2;
  cfg.episodes = 5;
  const auto a = run_headline(cfg);
  const auto b = run_headline(cfg);
  REQUIRE(a.per_seed.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(a.per_seed[k].trail_success == b.per_seed[k].trail_success);
    CHECK(a.per_seed[k].bc_success == b.per_seed[k].bc_success);
    CHECK(a.per_seed[k].trail_success >= 0.0);
    CHECK(a.per_seed[k].trail_success <= 1.0);
  }
}
