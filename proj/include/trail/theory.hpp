#pragma once

#include "trail/data.hpp"
#include "trail/envs.hpp"
#include "trail/mdp.hpp"
#include "trail/policy.hpp"
#include "trail/random.hpp"

#include <json.hpp>

#include <vector>

namespace trail {

/// d_off(s, a) = d_off(s) / |A|, the offline joint under uniform actions.
Matrix offline_joint(const Vector& d_off, int n_actions);

struct OptimalDecoder {
  TabularDecoder decoder;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> realized;  // |S| x |Z|: some a has phi(s, a) = z
  long fallback_cells = 0;  // (s, z) rows filled by the uniform fallback
};

/// pi_alpha*(a|s,z) = d(s,a) 1[z = phi(s,a)] / sum_a' d(s,a') 1[z = phi(s,a')].
/// Zero-denominator rows are uniform over {a : phi(s,a) = z}, or over A when z is unrealized at s.
OptimalDecoder optimal_decoder(const Matrix& joint, const LatentMap& phi);

/// pi_Z(z|s) = sum_{a : phi(s,a) = z} pi(a|s).
TabularLatent marginalize_policy(const TabularPolicy& pi, const LatentMap& phi);

/// Count estimate pi_Z(z|s) = (count(s, z) + prior) / (count(s) + |Z| prior); unseen states are uniform.
TabularLatent tabular_latent_bc(const ExpertDataset& expert, const LatentMap& phi, int n_latent, double prior_count = 0.0);

/// Offline pretraining terms shared by the three bounds.
struct PretrainingTerms {
  double j_t = 0.0;       // E_{d_off x Unif} KL(T || T_Z o phi)
  double j_de_max = 0.0;  // E_{s ~ d_off} max over realized z of KL(pi_alpha*(s,z) || pi_alpha(s,z))
  double j_de = 0.0;      // E_{d_off x Unif}[-log pi_alpha(a | s, phi(s,a))], the trainable surrogate
  double chi2 = 0.0;      // chi^2(d^pi* || d_off)
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;

  double transition_term() const { return c1 * std::sqrt(0.5 * j_t); }
  double decoding_term() const { return c2 * std::sqrt(0.5 * j_de_max); }
};

/// Throws ValidationError when d^pi*(s) > 0 but d_off(s) = 0, SupportError on an infinite KL.
PretrainingTerms pretraining_terms(const TabularMdp& mdp, const Vector& d_star, const DistVector& d_off,
                                   const LatentMap& phi, const Matrix& t_z, const TabularDecoder& decoder);

struct BoundReport {
  double j_t = 0.0;
  double j_de_max = 0.0;
  double j_de = 0.0;
  double j_bc_kl = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double chi2 = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double unrealized_latent_mass = 0.0;  // E_{d^pi*} pi_Z(z unrealized at s)
  bool holds = false;
};

BoundReport theorem1_report(const TabularMdp& mdp, const TabularPolicy& pi_star, const DistVector& d_off,
                            const LatentMap& phi, const Matrix& t_z, const TabularDecoder& decoder,
                            const TabularLatent& latent);

nlohmann::json to_json(const BoundReport& report);

struct SweepConfig {
  std::vector<std::size_t> n_grid{100, 1000, 10000};
  int resamples = 200;
  std::uint64_t seed = 0;
  double prior_count = 0.0;
};

struct SweepRow {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double stderr_diff = 0.0;
  double bound = 0.0;
  bool holds = false;
};

/// For each n: resample expert datasets, fit tabular latent BC, average the exact Diff of the composed policy.
/// bound = transition term + decoding term + C3 sqrt(|Z||S|/n).
std::vector<SweepRow> theorem2_sweep(const TabularMdp& mdp, const TabularPolicy& pi_star, const DistVector& d_off,
                                     const LatentMap& phi, const Matrix& t_z, const TabularDecoder& decoder,
                                     const SweepConfig& cfg);

/// Least-squares slope of log(mean_diff) against log(n).
double loglog_slope(const std::vector<SweepRow>& rows);

/// T(s'|s,a) = sum_j W[s'][j] Phi[s,a][j] with stochastic columns W and simplex points Phi.
struct LinearMdpSpec {
  int n_states = 0;
  int n_actions = 0;
  int d = 0;
  Matrix W;    // |S| x d
  Matrix Phi;  // (|S|*|A|) x d, row s*|A|+a is phi(s, a)
  double w_inf = 0.0;
  double c4 = 0.0;  // |S| |w|_inf / 4

  auto embedding(int s, int a) const { return Phi.row(static_cast<Eigen::Index>(s) * n_actions + a); }
  /// Embeddings of every action at s as columns (d x |A|).
  Matrix embeddings_at(int s) const;
};

struct LinearInstance {
  TabularMdp mdp;
  LinearMdpSpec spec;
};

LinearInstance build_linear_mdp(int n_states, int n_actions, int d, std::uint64_t seed, double gamma = 0.9);

/// Actions with bitwise-equal embeddings share a label (the lowest such action); |Z| = |A|.
LatentMap embedding_labels(const LinearMdpSpec& spec);

/// Weights lambda on the simplex minimizing |E lambda - z|_2 (exact search over supports; at most 16 points).
Vector simplex_weights(const Matrix& points, const Vector& z);

/// How a continuous theta_s becomes a mixture over embedding labels.
enum class ThetaDecoding {
  Barycentric,  // simplex weights over the embeddings at s reproducing theta_s (exact inside the hull)
  Nearest,      // the single nearest embedding (Euclidean, lowest action index on ties)
};

/// Theta decoded per state into label weights, each weight routed through the decoder row for that label.
TabularPolicy decode_theta_policy(const LinearMdpSpec& spec, const Matrix& theta, const TabularDecoder& decoder,
                                  ThetaDecoding mode = ThetaDecoding::Barycentric, double* max_residual = nullptr);

struct Theorem3Report {
  double lhs = 0.0;
  double term1 = 0.0;  // transition term (zero for an exact linear model)
  double term2 = 0.0;  // decoding term
  double grad_l1 = 0.0;
  double grad_term = 0.0;  // C3 * C4 * grad_l1
  double c3 = 0.0;
  double c4 = 0.0;
  double chi2 = 0.0;
  double rhs = 0.0;          // term1 + term2 + C3 * C4 * grad_l1
  double rhs_printed = 0.0;  // term1 + term2 + C4 * grad_l1, without the horizon factor
  double theta_residual = 0.0;
  bool holds = false;
};

/// Population gradient of E_{s~d^pi*, a~pi*}[|theta_s - phi(s,a)|^2]: 2 d(s) (theta_s - E[phi(s,a)|s]).
Matrix population_mse_gradient(const LinearMdpSpec& spec, const Vector& d_star, const TabularPolicy& pi_star,
                               const Matrix& theta);

Theorem3Report theorem3_report(const LinearMdpSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi_star,
                               const DistVector& d_off, const Matrix& theta, const TabularDecoder& decoder,
                               ThetaDecoding mode = ThetaDecoding::Barycentric);

nlohmann::json to_json(const Theorem3Report& report);

// ---- random instance generators (Dirichlet(1) distributions, floored full-support policies) ----

TabularMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng);
TabularPolicy random_policy(int n_states, int n_actions, Rng& rng, double min_prob = 1e-3);
Matrix random_stochastic_rows(Eigen::Index rows, int cols, Rng& rng, double min_prob = 1e-3);
/// Surjective onto {0..n_latent-1} at every state when n_latent <= n_actions.
LatentMap random_latent_map(int n_states, int n_actions, int n_latent, Rng& rng);

struct Theorem1Instance {
  TabularMdp mdp;
  TabularPolicy pi_star;
  DistVector d_off;
  LatentMap phi;
  Matrix t_z;
  TabularDecoder decoder;
  TabularLatent latent;
};

/// |S| in [2, max_states], |A| in [2, max_actions], |Z| in [1, min(max_latent, |A|)], gamma from {0.5, 0.9}.
Theorem1Instance random_theorem1_instance(Rng& rng, int max_states = 10, int max_actions = 6, int max_latent = 4);

struct Theorem3Instance {
  LinearInstance linear;
  TabularPolicy pi_star;
  DistVector d_off;
  Matrix theta;
  TabularDecoder decoder;
};

/// Random exact-linear MDP, full-support expert, theta inside the convex hull of the embeddings,
/// and the optimal decoder for the embedding labels.
Theorem3Instance random_theorem3_instance(Rng& rng, int max_states = 8, int max_actions = 6, int max_d = 4);

}  // namespace trail
