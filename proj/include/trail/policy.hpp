#pragma once

#include "trail/data.hpp"
#include "trail/ebm.hpp"
#include "trail/envs.hpp"
#include "trail/nn.hpp"

#include <variant>

namespace trail {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kProbFloor = 1e-12;

/// pi_alpha(a | s, z) as a table; row s * n_latent + z is a distribution over actions.
struct TabularDecoder {
  int n_states = 0;
  int n_latent = 0;
  int n_actions = 0;
  Matrix probs;

  auto row(int s, int z) const { return probs.row(static_cast<Eigen::Index>(s) * n_latent + z); }
  double operator()(int s, int z, int a) const { return probs(static_cast<Eigen::Index>(s) * n_latent + z, a); }
  void validate() const;
};

/// Diagonal Gaussian over actions given [s; z]; network output is [mean; log_std].
struct GaussianDecoder {
  int state_dim = 0;
  int latent_dim = 0;
  int action_dim = 0;
  Mlp net;
};

using ActionDecoder = std::variant<TabularDecoder, GaussianDecoder>;

/// pi_Z(z | s) as an |S| x |Z| table.
struct TabularLatent {
  Matrix probs;

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_latent() const { return static_cast<int>(probs.cols()); }
  void validate() const;
};

/// Diagonal Gaussian over R^d given s; network output is [mean; log_std].
struct GaussianLatent {
  int latent_dim = 0;
  Mlp net;
};

/// theta: s -> R^d. Tabular states use the d x |S| table `theta`; continuous states use `net`.
struct DeterministicLatent {
  bool tabular = true;
  Matrix theta;
  Mlp net;
};

using LatentPolicy = std::variant<TabularLatent, GaussianLatent, DeterministicLatent>;

/// Mean Gaussian negative log-likelihood of `targets` under columns of [mean; raw_log_std].
/// `upstream` receives d loss / d outputs (already divided by the batch size).
double gaussian_nll(const Matrix& outputs, const Matrix& targets, Matrix* upstream);

struct LossReport {
  double value = 0.0;
  Vector grad;
  Matrix grad_latent;     // d loss / d z where applicable
  long floor_events = 0;  // tabular entries that hit the probability floor
};

// ---- action decoder ----

/// Mean -log pi_alpha(a | s, phi(s, a)) over `pairs`; gradient is with respect to the table entries.
LossReport decoder_loss(const std::vector<StateAction>& pairs, const TabularDecoder& decoder, const LatentMap& phi);

/// Gaussian decoder NLL on a batch with latent codes `z`; `grad_latent` holds d loss / d z.
LossReport decoder_loss(const Matrix& states, const Matrix& actions, const Matrix& z, const GaussianDecoder& decoder);

struct DecoderConfig {
  std::vector<int> hidden{256, 256};
  int steps = 1000;
  int batch = 64;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  bool joint_phi = false;  // let decoder gradients update the phi encoder
};

/// Count-based maximum likelihood decoder. Unseen (s, z) fall back to uniform over {a : phi(s,a) = z}
/// (or over all actions when z is unrealized at s). `finetune` adds expert counts when given.
TabularDecoder train_action_decoder(const OfflineDataset& offline, const LatentMap& phi,
                                    const ExpertDataset* finetune = nullptr);

/// Gaussian decoder fit by Adam on NLL; with `cfg.joint_phi` the encoder is co-trained in place.
GaussianDecoder train_action_decoder(const ContinuousOfflineDataset& offline, ActionEncoder& encoder,
                                     const DecoderConfig& cfg, const ContinuousExpertDataset* finetune = nullptr);

// ---- latent behavioral cloning ----

/// Mean -log pi_Z(phi(s, a) | s); gradient with respect to the table entries.
LossReport latent_bc_nll(const std::vector<StateAction>& pairs, const TabularLatent& latent, const LatentMap& phi);

/// Gaussian latent NLL of the codes `z` given `states`.
LossReport latent_bc_nll(const Matrix& states, const Matrix& z, const GaussianLatent& latent);

struct LatentConfig {
  std::vector<int> hidden{256, 256};
  int steps = 1000;
  int batch = 64;
  double lr = 3e-4;
  std::uint64_t seed = 0;
};

GaussianLatent train_gaussian_latent(const Matrix& states, const Matrix& z, const LatentConfig& cfg);

struct MseReport {
  double value = 0.0;
  Vector grad;             // flattened gradient (table column-major d x |S|, or network parameters)
  double grad_l1 = 0.0;    // |grad|_1 over the table (tabular theta only)
};

/// E[|theta_s - phi_bar(s, a)|^2] with tabular theta (d x |S|) and codes `targets` (d x n).
MseReport latent_mse_loss(const std::vector<int>& states, const Matrix& targets, const Matrix& theta);

/// Same loss for a network theta on continuous states.
MseReport latent_mse_loss(const Matrix& states, const Matrix& targets, const Mlp& theta);

/// Minimizer of the tabular MSE: per-state mean of the targets (zero for unseen states).
Matrix fit_tabular_theta(const std::vector<int>& states, const Matrix& targets, int n_states);

DeterministicLatent train_deterministic_latent(const Matrix& states, const Matrix& targets, const LatentConfig& cfg);

// ---- composition and inference ----

/// (pi_alpha o pi_Z)(a|s) = sum_z pi_alpha(a|s,z) pi_Z(z|s).
TabularPolicy compose_policy(const TabularLatent& latent, const TabularDecoder& decoder);

using Observation = std::variant<int, Vector>;
using Action = std::variant<int, Vector>;

/// z ~ pi_Z(s) (or z = theta_s), then a ~ pi_alpha(s, z). Throws ValidationError on mode mismatch.
Action infer_action(const Observation& obs, const LatentPolicy& latent, const ActionDecoder& decoder, Rng& rng,
                    bool sample_decoder = true);

}  // namespace trail
