#pragma once

// Randomized checks of the inequalities the bound is assembled from. Each check draws its own
// instances from `seed` and reports the worst lhs - rhs it saw.

#include "trail/reparam.hpp"
#include "trail/theory.hpp"

#include <algorithm>
#include <string>

namespace trail::testing {

struct LemmaOutcome {
  std::string name;
  int instances = 0;
  int violations = 0;
  double worst_gap = -INFINITY;  // max over instances of lhs - rhs

  void record(double lhs, double rhs, double tol) {
    ++instances;
    worst_gap = std::max(worst_gap, lhs - rhs);
    if (lhs > rhs + tol) ++violations;
  }
  bool passed() const { return instances > 0 && violations == 0; }
};

struct RandomPair {
  TabularMdp mdp;
  TabularPolicy pi1;
  TabularPolicy pi2;
};

inline RandomPair random_pair(Rng& rng) {
  const int ns = 2 + rng.uniform_int(9);
  const int na = 2 + rng.uniform_int(5);
  const double gamma = rng.bernoulli(0.5) ? 0.5 : 0.9;
  auto mdp = random_mdp(ns, na, gamma, rng);
  auto pi1 = random_policy(ns, na, rng);
  auto pi2 = random_policy(ns, na, rng);
  return {std::move(mdp), std::move(pi1), std::move(pi2)};
}

/// Diff(pi2, pi1) <= gamma / (1 - gamma) * Err_{d^pi1}(pi1, pi2, T).
inline LemmaOutcome check_performance_difference(int instances, std::uint64_t seed) {
  LemmaOutcome out{"performance difference"};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    auto p = random_pair(rng);
    const double g = p.mdp.gamma();
    const Vector d1 = state_visitation(p.mdp, p.pi1).probs();
    out.record(policy_diff(p.mdp, p.pi2, p.pi1), g / (1 - g) * transition_err(d1, p.pi1, p.pi2, p.mdp.transition()), 1e-12);
  }
  return out;
}

/// Err(T) <= |A| E_{d, Unif}[TV(T, Tbar)] + Err(Tbar).
inline LemmaOutcome check_model_swap(int instances, std::uint64_t seed) {
  LemmaOutcome out{"model swap"};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    auto p = random_pair(rng);
    const int ns = p.mdp.n_states(), na = p.mdp.n_actions();
    const Matrix tbar = random_stochastic_rows(static_cast<Eigen::Index>(ns) * na, ns, rng, 0.0);
    const Vector d = state_visitation(p.mdp, p.pi1).probs();
    double model_term = 0.0;
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < na; ++a)
        model_term += d(s) * tv_distance(p.mdp.row(s, a), tbar.row(static_cast<Eigen::Index>(s) * na + a));
    out.record(transition_err(d, p.pi1, p.pi2, p.mdp.transition()), model_term + transition_err(d, p.pi1, p.pi2, tbar),
               1e-12);
  }
  return out;
}

/// With Tbar factored through phi, Err(Tbar) <= E_d TV(pi1_Z, pi2_Z).
inline LemmaOutcome check_bottleneck(int instances, std::uint64_t seed) {
  LemmaOutcome out{"bottleneck"};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    auto p = random_pair(rng);
    const int ns = p.mdp.n_states(), na = p.mdp.n_actions();
    const int nz = 1 + rng.uniform_int(std::min(4, na));
    const auto phi = random_latent_map(ns, na, nz, rng);
    const Matrix tbar = factored_rows(phi, random_stochastic_rows(static_cast<Eigen::Index>(ns) * nz, ns, rng));
    const Vector d = state_visitation(p.mdp, p.pi1).probs();
    const auto z1 = marginalize_policy(p.pi1, phi), z2 = marginalize_policy(p.pi2, phi);
    double rhs = 0.0;
    for (int s = 0; s < ns; ++s) rhs += d(s) * tv_distance(z1.probs.row(s), z2.probs.row(s));
    out.record(transition_err(d, p.pi1, p.pi2, tbar), rhs, 1e-12);
  }
  return out;
}

struct DecodeInstance {
  int ns = 0, na = 0, nz = 0;
  LatentMap phi;
  Matrix joint;  // |S| x |A|, may contain zeros
  TabularLatent latent;
  TabularDecoder decoder;  // arbitrary learned decoder
};

inline DecodeInstance random_decode_instance(Rng& rng) {
  DecodeInstance x;
  x.ns = 2 + rng.uniform_int(9);
  x.na = 2 + rng.uniform_int(5);
  x.nz = 1 + rng.uniform_int(std::min(4, x.na));
  x.phi = random_latent_map(x.ns, x.na, x.nz, rng);
  x.joint = Matrix::Zero(x.ns, x.na);
  for (int s = 0; s < x.ns; ++s)
    for (int a = 0; a < x.na; ++a) x.joint(s, a) = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
  x.joint /= x.joint.sum();
  x.latent = TabularLatent{random_stochastic_rows(x.ns, x.nz, rng)};
  x.decoder = TabularDecoder{x.ns, x.nz, x.na, random_stochastic_rows(static_cast<Eigen::Index>(x.ns) * x.nz, x.na, rng)};
  return x;
}

/// Marginalizing the optimally decoded latent policy returns the latent policy (max abs diff <= 1e-12).
inline LemmaOutcome check_marginal_identity(int instances, std::uint64_t seed) {
  LemmaOutcome out{"optimal decoder marginal identity"};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    auto x = random_decode_instance(rng);
    const auto opt = optimal_decoder(x.joint, x.phi).decoder;
    const auto back = marginalize_policy(compose_policy(x.latent, opt), x.phi);
    out.record((back.probs - x.latent.probs).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
  return out;
}

inline double max_decoder_tv(const TabularDecoder& a, const TabularDecoder& b, int s) {
  double worst = 0.0;
  for (int z = 0; z < a.n_latent; ++z) worst = std::max(worst, tv_distance(a.row(s, z), b.row(s, z)));
  return worst;
}

/// TV(pi_Z(s), marginal of decoded pi_Z(s)) <= max_z TV(pi_alpha*(s, z), pi_alpha(s, z)), per state.
inline LemmaOutcome check_decoding_tv(int instances, std::uint64_t seed) {
  LemmaOutcome out{"decoding TV"};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    auto x = random_decode_instance(rng);
    const auto opt = optimal_decoder(x.joint, x.phi).decoder;
    const auto marg = marginalize_policy(compose_policy(x.latent, x.decoder), x.phi);
    double gap = -INFINITY;
    for (int s = 0; s < x.ns; ++s) {
      gap = std::max(gap, tv_distance(x.latent.probs.row(s), marg.probs.row(s)) - max_decoder_tv(opt, x.decoder, s));
    }
    out.record(gap, 0.0, 1e-12);
  }
  return out;
}

/// TV(pi1_Z, pi_alpha,Z) <= max_z TV(pi_alpha, pi_alpha*) + TV(pi1_Z, pi_Z), per state.
inline LemmaOutcome check_latent_triangle(int instances, std::uint64_t seed) {
  LemmaOutcome out{"latent triangle"};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    auto x = random_decode_instance(rng);
    const auto opt = optimal_decoder(x.joint, x.phi).decoder;
    const auto pi1z = marginalize_policy(random_policy(x.ns, x.na, rng), x.phi);
    const auto marg = marginalize_policy(compose_policy(x.latent, x.decoder), x.phi);
    double gap = -INFINITY;
    for (int s = 0; s < x.ns; ++s) {
      const double lhs = tv_distance(pi1z.probs.row(s), marg.probs.row(s));
      const double rhs = max_decoder_tv(opt, x.decoder, s) + tv_distance(pi1z.probs.row(s), x.latent.probs.row(s));
      gap = std::max(gap, lhs - rhs);
    }
    out.record(gap, 0.0, 1e-12);
  }
  return out;
}

/// E_rho1[h] <= (1 + sqrt(chi2(rho1 || rho2))) sqrt(E_rho2[h^2]).
inline LemmaOutcome check_off_policy(int instances, std::uint64_t seed) {
  LemmaOutcome out{"off-policy Cauchy-Schwarz"};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    const int k = 2 + rng.uniform_int(9);
    const Vector rho1 = rng.dirichlet(k, rng.bernoulli(0.5) ? 0.3 : 1.0);
    const Vector rho2 = rng.dirichlet(k);
    Vector h(k);
    for (int j = 0; j < k; ++j) h(j) = rng.uniform(-1.0, 3.0);
    out.record(rho1.dot(h), (1.0 + std::sqrt(chi2_divergence(rho1, rho2))) * std::sqrt(rho2.dot(h.cwiseAbs2())), 1e-12);
  }
  return out;
}

/// Monte-Carlo E[TV(rho, rho_hat_n)] <= sqrt(k / n) / 2 at k in {2, 8}, n in {10, 100}.
inline LemmaOutcome check_empirical_tv(int resamples, std::uint64_t seed) {
  LemmaOutcome out{"empirical TV"};
  Rng rng(seed);
  for (int k : {2, 8}) {
    for (int n : {10, 100}) {
      for (int rep = 0; rep < 5; ++rep) {
        const Vector rho = rng.dirichlet(k);
        double total = 0.0;
        for (int r = 0; r < resamples; ++r) {
          Vector counts = Vector::Zero(k);
          for (int i = 0; i < n; ++i) counts(rng.categorical(rho)) += 1.0;
          total += tv_distance(rho, counts / n);
        }
        out.record(total / resamples, 0.5 * std::sqrt(static_cast<double>(k) / n), 0.0);
      }
    }
  }
  return out;
}

}  // namespace trail::testing
