#include "lemma_checks.hpp"
#include "trail/evaluation.hpp"
#include "trail/theory.hpp"

#include <doctest.h>

using namespace trail;
using trail::testing::LemmaOutcome;

namespace {

void require_lemma(const LemmaOutcome& out) {
  INFO(out.name << ": worst gap " << out.worst_gap);
  CHECK(out.instances > 0);
  CHECK(out.violations == 0);
}

LatentMap pair_map() {
  LatentMap phi;
  phi.n_latent = 2;
  phi.table.resize(1, 4);
  phi.table << 0, 1, 1, 0;
  return phi;
}

// Exact population MSE E_{s ~ d, a ~ pi}[|theta_s - phi(s, a)|^2].
double population_mse(const LinearMdpSpec& spec, const Vector& d, const TabularPolicy& pi, const Matrix& theta) {
  double total = 0.0;
  for (int s = 0; s < spec.n_states; ++s)
    for (int a = 0; a < spec.n_actions; ++a)
      total += d(s) * pi(s, a) * (theta.col(s) - spec.embedding(s, a).transpose()).squaredNorm();
  return total;
}

}  // namespace

TEST_CASE("optimal decoder") {
  SUBCASE("injective map gives a delta decoder") {
    const auto dec = optimal_decoder(offline_joint(Vector::Constant(2, 0.5), 3), LatentMap::identity(2, 3)).decoder;
    for (int s = 0; s < 2; ++s)
      for (int z = 0; z < 3; ++z) CHECK(dec(s, z, z) == 1.0);
  }
  SUBCASE("uniform joint splits shared latents evenly") {
    const auto dec = optimal_decoder(offline_joint(Vector::Ones(1), 4), pair_map()).decoder;
    CHECK(dec(0, 0, 0) == 0.5);
    CHECK(dec(0, 0, 3) == 0.5);
    CHECK(dec(0, 1, 0) == 0.0);
  }
  SUBCASE("formula evaluation") {
    Matrix joint(1, 4);
    joint << 0.3, 0.35, 0.25, 0.1;
    const auto dec = optimal_decoder(joint, pair_map()).decoder;
    CHECK(dec(0, 0, 0) == doctest::Approx(0.75));
    CHECK(dec(0, 0, 3) == doctest::Approx(0.25));
  }
  SUBCASE("empty rows fall back and are flagged") {
    LatentMap phi;
    phi.n_latent = 3;
    phi.table.resize(1, 4);
    phi.table << 0, 1, 1, 0;
    Matrix joint(1, 4);
    joint << 0.0, 0.5, 0.5, 0.0;
    const auto best = optimal_decoder(joint, phi);
    CHECK(best.fallback_cells == 2);
    CHECK(best.decoder(0, 0, 0) == 0.5);
    CHECK(best.decoder(0, 0, 3) == 0.5);
    CHECK_FALSE(best.realized(0, 2));
    CHECK(best.decoder(0, 2, 1) == 0.25);
  }
}

TEST_CASE("marginalization") {
  Rng rng(1);
  auto pi = random_policy(3, 4, rng);
  CHECK(marginalize_policy(pi, LatentMap::identity(3, 4)).probs == pi.probs());
  CHECK(marginalize_policy(TabularPolicy::uniform(1, 4), pair_map()).probs(0, 0) == 0.5);
  Matrix p(1, 4);
  p << 0.1, 0.2, 0.3, 0.4;
  const auto z = marginalize_policy(TabularPolicy(p), pair_map());
  CHECK(z.probs(0, 0) == doctest::Approx(0.5));
  CHECK(z.probs(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("lemma suite") {
  require_lemma(trail::testing::check_performance_difference(100, 1));
  require_lemma(trail::testing::check_model_swap(100, 2));
  require_lemma(trail::testing::check_bottleneck(100, 3));
  require_lemma(trail::testing::check_marginal_identity(100, 4));
  require_lemma(trail::testing::check_decoding_tv(100, 5));
  require_lemma(trail::testing::check_latent_triangle(100, 6));
  require_lemma(trail::testing::check_off_policy(100, 7));
  require_lemma(trail::testing::check_empirical_tv(500, 8));
}

TEST_CASE("tabular latent behavioral cloning") {
  ExpertDataset data;
  data.n_states = 2;
  data.n_actions = 4;
  data.pairs = {{0, 0}, {0, 3}, {0, 1}, {0, 0}};
  LatentMap phi;
  phi.n_latent = 2;
  phi.table.resize(2, 4);
  phi.table << 0, 1, 1, 0, 0, 1, 1, 0;
  const auto lat = tabular_latent_bc(data, phi, 2);
  CHECK(lat.probs(0, 0) == 0.75);
  CHECK(lat.probs(0, 1) == 0.25);
  CHECK(lat.probs(1, 0) == 0.5);  // unseen
  const auto smoothed = tabular_latent_bc(data, phi, 2, 1.0);
  CHECK(smoothed.probs(0, 0) == doctest::Approx(4.0 / 6.0));

  SUBCASE("sampling rate against the count-estimate bound") {
    Rng rng(2);
    auto mdp = random_mdp(6, 5, 0.9, rng);
    auto pi = random_policy(6, 5, rng);
    const auto map = random_latent_map(6, 5, 3, rng);
    const auto truth = marginalize_policy(pi, map);
    const Vector d = state_visitation(mdp, pi).probs();
    for (std::size_t n : {100u, 1000u, 10000u}) {
      double total = 0.0;
      for (int r = 0; r < 200; ++r) {
        const auto est = tabular_latent_bc(generate_expert(mdp, pi, n, derive_seed(3, n, r)), map, 3);
        for (int s = 0; s < 6; ++s) total += d(s) * tv_distance(truth.probs.row(s), est.probs.row(s));
      }
      CHECK(total / 200 <= std::sqrt(6.0 * 3.0 / static_cast<double>(n)));
    }
  }
}

TEST_CASE("bound report") {
  SUBCASE("ground truth factorization is the equality case") {
    auto world = build_redundant_gridworld(default_grid_spec(16, 0.1));
    const auto pi = optimal_expert(world);
    const auto d_off = DistVector::uniform(world.mdp.n_states());
    Matrix t_z(world.mdp.n_states() * 4, world.mdp.n_states());
    for (int s = 0; s < world.mdp.n_states(); ++s)
      for (int z = 0; z < 4; ++z) t_z.row(s * 4 + z) = world.mdp.row(s, z);
    const auto dec = optimal_decoder(offline_joint(d_off.probs(), 64), world.phi_star).decoder;
    const auto rep = theorem1_report(world.mdp, pi, d_off, world.phi_star, t_z, dec,
                                     marginalize_policy(pi, world.phi_star));
    CHECK(rep.j_t == 0.0);
    CHECK(rep.j_de_max == 0.0);
    CHECK(rep.j_bc_kl <= 1e-15);
    CHECK(rep.lhs <= 1e-12);
    CHECK(rep.holds);
  }
  SUBCASE("identity reparametrization keeps only the imitation term") {
    Rng rng(4);
    auto mdp = random_mdp(4, 3, 0.9, rng);
    auto pi = random_policy(4, 3, rng);
    const auto phi = LatentMap::identity(4, 3);
    const auto dec = optimal_decoder(offline_joint(Vector::Constant(4, 0.25), 3), phi).decoder;
    TabularLatent lat{random_stochastic_rows(4, 3, rng)};
    const auto rep = theorem1_report(mdp, pi, DistVector::uniform(4), phi, mdp.transition(), dec, lat);
    CHECK(rep.j_t == 0.0);
    CHECK(rep.j_de_max == 0.0);
    CHECK(rep.rhs == doctest::Approx(rep.c3 * std::sqrt(0.5 * rep.j_bc_kl)));
    CHECK(rep.holds);
  }
  SUBCASE("constants") {
    Rng rng(5);
    auto inst = random_theorem1_instance(rng);
    const auto rep = theorem1_report(inst.mdp, inst.pi_star, inst.d_off, inst.phi, inst.t_z, inst.decoder, inst.latent);
    const double g = inst.mdp.gamma();
    const double chi2 = chi2_divergence(state_visitation(inst.mdp, inst.pi_star).probs(), inst.d_off.probs());
    CHECK(rep.c3 == doctest::Approx(g / (1 - g)));
    CHECK(rep.chi2 == doctest::Approx(chi2));
    CHECK(rep.c2 == doctest::Approx(rep.c3 * (1 + std::sqrt(chi2))));
    CHECK(rep.c1 == doctest::Approx(inst.mdp.n_actions() * rep.c2));
    const auto doc = to_json(rep);
    CHECK(doc.at("holds").get<bool>() == rep.holds);
  }
  SUBCASE("random instances hold") {
    Rng rng(6);
    for (int i = 0; i < 30; ++i) {
      auto inst = random_theorem1_instance(rng);
      CHECK(theorem1_report(inst.mdp, inst.pi_star, inst.d_off, inst.phi, inst.t_z, inst.decoder, inst.latent).holds);
    }
  }
  SUBCASE("coverage and support violations") {
    Rng rng(7);
    auto inst = random_theorem1_instance(rng);
    Vector d = inst.d_off.probs();
    d(0) = 0.0;
    d /= d.sum();
    CHECK_THROWS_AS(theorem1_report(inst.mdp, inst.pi_star, DistVector(d), inst.phi, inst.t_z, inst.decoder, inst.latent),
                    ValidationError);
    auto lat = inst.latent;
    lat.probs.row(0).setZero();
    lat.probs(0, 0) = 1.0;
    if (inst.phi.n_latent > 1) {
      CHECK_THROWS_AS(theorem1_report(inst.mdp, inst.pi_star, inst.d_off, inst.phi, inst.t_z, inst.decoder, lat),
                      SupportError);
    }
  }
}

TEST_CASE("sample-size sweep") {
  SUBCASE("bound arithmetic") {
    // gamma 0.9, |S| = 9, |Z| = 4, n = 10^4: 9 * sqrt(36 / 10^4)
    CHECK(0.9 / 0.1 * std::sqrt(9.0 * 4.0 / 1e4) == doctest::Approx(0.54));
  }
  SUBCASE("ground truth reduces the bound to the sampling term") {
    auto world = build_redundant_gridworld(default_grid_spec(2, 0.1, 0.9));
    const auto pi = soft_expert(world, 0.5);
    const auto d_off = DistVector::uniform(world.mdp.n_states());
    const int ns = world.mdp.n_states();
    Matrix t_z(ns * 4, ns);
    for (int s = 0; s < ns; ++s)
      for (int z = 0; z < 4; ++z) t_z.row(s * 4 + z) = world.mdp.row(s, z);
    const auto dec = optimal_decoder(offline_joint(d_off.probs(), 8), world.phi_star).decoder;
    SweepConfig cfg;
    cfg.n_grid = {100, 1000};
    cfg.resamples = 20;
    const auto rows = theorem2_sweep(world.mdp, pi, d_off, world.phi_star, t_z, dec, cfg);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
      CHECK(row.bound == doctest::Approx(9.0 * std::sqrt(4.0 * ns / static_cast<double>(row.n))));
      CHECK(row.holds);
    }
    CHECK(rows[1].mean_diff < rows[0].mean_diff);
  }
  SUBCASE("slope fit") {
    std::vector<SweepRow> rows;
    for (std::size_t n : {10u, 100u, 1000u}) rows.push_back({n, 3.0 / std::sqrt(static_cast<double>(n)), 0, 0, true});
    CHECK(loglog_slope(rows) == doctest::Approx(-0.5).epsilon(1e-12));
  }
}

TEST_CASE("linear MDPs") {
  auto lin = build_linear_mdp(6, 4, 3, 11);
  CHECK((lin.mdp.transition().rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  CHECK((lin.spec.Phi * lin.spec.W.transpose() - lin.mdp.transition()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(lin.spec.w_inf == lin.spec.W.cwiseAbs().maxCoeff());
  CHECK(lin.spec.c4 == doctest::Approx(0.25 * 6 * lin.spec.w_inf));
  CHECK(0.25 * 6 * 1.0 == 1.5);

  auto flat = build_linear_mdp(4, 3, 1, 12);
  Rng rng(1);
  CHECK(policy_diff(flat.mdp, random_policy(4, 3, rng), random_policy(4, 3, rng)) <= 1e-12);
  const auto labels = embedding_labels(flat.spec);
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 3; ++a) CHECK(labels(s, a) == 0);
}

TEST_CASE("simplex weights") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + rng.uniform_int(4);
    const int k = 1 + rng.uniform_int(6);
    const Matrix pts = Matrix::NullaryExpr(d, k, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    const Vector inside = pts * rng.dirichlet(k);
    const Vector lam = simplex_weights(pts, inside);
    CHECK(std::abs(lam.sum() - 1.0) <= 1e-12);
    CHECK(lam.minCoeff() >= -1e-12);
    CHECK((pts * lam - inside).norm() <= 1e-9);

    // Outside the hull: no point of a dense random sample of the simplex does better.
    const Vector outside = inside + 3.0 * rng.normal_vector(d);
    const double got = (pts * simplex_weights(pts, outside) - outside).norm();
    for (int r = 0; r < 2000; ++r) CHECK(got <= (pts * rng.dirichlet(k, 0.3) - outside).norm() + 1e-12);
  }
}

TEST_CASE("population gradient") {
  Rng rng(3);
  auto inst = random_theorem3_instance(rng);
  const auto& spec = inst.linear.spec;
  const Vector d = state_visitation(inst.linear.mdp, inst.pi_star).probs();
  const Matrix theta = Matrix::Random(spec.d, spec.n_states);
  const Matrix g = population_mse_gradient(spec, d, inst.pi_star, theta);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Matrix tp = theta, tm = theta;
    tp.data()[i] += h;
    tm.data()[i] -= h;
    const double num = (population_mse(spec, d, inst.pi_star, tp) - population_mse(spec, d, inst.pi_star, tm)) / (2 * h);
    CHECK(g.data()[i] == doctest::Approx(num).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("linear bound report") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = random_theorem3_instance(rng);
    const auto& lin = inst.linear;
    const auto rep = theorem3_report(lin.spec, lin.mdp, inst.pi_star, inst.d_off, inst.theta, inst.decoder);
    CHECK(rep.term1 <= 1e-12);
    CHECK(rep.theta_residual <= 1e-9);
    CHECK(rep.holds);
    const auto nearest =
        theorem3_report(lin.spec, lin.mdp, inst.pi_star, inst.d_off, inst.theta, inst.decoder, ThetaDecoding::Nearest);
    CHECK(nearest.holds);

    // Conditional mean: zero gradient, decoding term only.
    const Vector d = state_visitation(lin.mdp, inst.pi_star).probs();
    Matrix mean(lin.spec.d, lin.spec.n_states);
    for (int s = 0; s < lin.spec.n_states; ++s) mean.col(s) = lin.spec.embeddings_at(s) * inst.pi_star.probs().row(s).transpose();
    const auto at_mean = theorem3_report(lin.spec, lin.mdp, inst.pi_star, inst.d_off, mean, inst.decoder);
    CHECK(at_mean.grad_term <= 1e-10);
    CHECK(at_mean.rhs == doctest::Approx(at_mean.term2).epsilon(1e-9));
    CHECK(at_mean.holds);
  }
}
