#include "trail/envs.hpp"
#include "trail/reparam.hpp"
#include "trail/theory.hpp"

#include <doctest.h>

#include <numeric>
#include <set>

using namespace trail;

TEST_CASE("k equal to the action count is lossless") {
  Rng rng(1);
  auto mdp = random_mdp(5, 4, 0.9, rng);
  auto rep = tabular_reparametrize(mdp, DistVector::uniform(5), 4);
  CHECK(rep.j_t == 0.0);
  for (int s = 0; s < 5; ++s) {
    std::set<int> labels;
    for (int a = 0; a < 4; ++a) labels.insert(rep.phi(s, a));
    CHECK(labels.size() == 4);
  }
  CHECK((factored_rows(rep.phi, rep.t_z) - mdp.transition()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicate groups on the redundant gridworld") {
  auto world = build_redundant_gridworld(default_grid_spec(16, 0.1));
  auto rep = tabular_reparametrize(world.mdp, DistVector(world.mdp.initial()), 4);
  CHECK(rep.j_t == 0.0);
  for (int s = 0; s < world.mdp.n_states(); ++s) {
    // Only states whose four direction rows are distinct have a unique 4-partition.
    std::set<std::vector<double>> distinct;
    for (int a = 0; a < 4; ++a) {
      const Vector r = world.mdp.row(s, a).transpose();
      distinct.insert(std::vector<double>(r.data(), r.data() + r.size()));
    }
    if (distinct.size() != 4) continue;
    for (int a = 0; a < 64; ++a)
      for (int b = 0; b < 64; ++b) CHECK((rep.phi(s, a) == rep.phi(s, b)) == (a % 4 == b % 4));
  }
}

TEST_CASE("single cluster is the mean row") {
  Rng rng(2);
  auto mdp = random_mdp(4, 3, 0.9, rng);
  const Vector d = rng.dirichlet(4);
  auto rep = tabular_reparametrize(mdp, DistVector(d), 1);
  double expected = 0.0;
  for (int s = 0; s < 4; ++s) {
    Vector mean = Vector::Zero(4);
    for (int a = 0; a < 3; ++a) mean += mdp.row(s, a).transpose() / 3.0;
    for (int a = 0; a < 3; ++a) {
      for (int sp = 0; sp < 4; ++sp) {
        const double p = mdp.prob(s, a, sp);
        expected += d(s) / 3.0 * p * std::log(p / mean(sp));
      }
    }
  }
  CHECK(rep.j_t == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("invariance to action relabeling and monotonicity in k") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int ns = 2 + rng.uniform_int(5);
    const int na = 2 + rng.uniform_int(5);
    auto mdp = random_mdp(ns, na, 0.9, rng);
    const DistVector d(rng.dirichlet(ns));
    std::vector<int> perm(static_cast<std::size_t>(na));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Matrix permuted(mdp.transition().rows(), ns);
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < na; ++a) permuted.row(s * na + a) = mdp.row(s, perm[static_cast<std::size_t>(a)]);

    double previous = INFINITY;
    for (int k = 1; k <= na; ++k) {
      const auto base = tabular_reparametrize(mdp, d, k, 5);
      const auto moved = tabular_reparametrize(permuted, ns, na, d, k, 5);
      CHECK(std::abs(base.j_t - moved.j_t) <= 1e-12);
      CHECK(base.j_t <= previous + 1e-12);
      previous = base.j_t;
    }
  }
}

TEST_CASE("J_T direct formula and errors") {
  Rng rng(4);
  auto mdp = random_mdp(3, 4, 0.9, rng);
  const auto phi = random_latent_map(3, 4, 2, rng);
  const Matrix t_z = random_stochastic_rows(6, 3, rng);
  const Vector d = rng.dirichlet(3);
  double expected = 0.0;
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 4; ++a)
      for (int sp = 0; sp < 3; ++sp) {
        const double p = mdp.prob(s, a, sp);
        expected += d(s) / 4.0 * p * std::log(p / t_z(s * 2 + phi(s, a), sp));
      }
  CHECK(transition_representation_error(mdp.transition(), d, phi, t_z) == doctest::Approx(expected).epsilon(1e-13));
  CHECK_THROWS_AS(tabular_reparametrize(mdp, DistVector(d), 5), ValidationError);
  CHECK_THROWS_AS(tabular_reparametrize(mdp, DistVector(d), 0), ValidationError);
}
