#pragma once

#include "trail/data.hpp"
#include "trail/nn.hpp"
#include "trail/rff.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace trail {

/// How states and actions are presented to the encoders: one-hot for tabular data, raw vectors otherwise.
struct FeatureSpec {
  bool tabular = true;
  int n_states = 0;
  int n_actions = 0;
  int state_dim = 0;
  int action_dim = 0;

  static FeatureSpec for_tabular(int n_states, int n_actions) { return {true, n_states, n_actions, 0, 0}; }
  static FeatureSpec for_continuous(int state_dim, int action_dim) { return {false, 0, 0, state_dim, action_dim}; }

  int state_input_dim() const { return tabular ? n_states : state_dim; }
  int action_input_dim() const { return tabular ? n_actions : action_dim; }
  int sa_input_dim() const { return state_input_dim() + action_input_dim(); }

  Matrix encode_states(const std::vector<int>& states) const;
  Matrix encode_state_actions(const std::vector<int>& states, const std::vector<int>& actions) const;
};

/// Encoder inputs for every offline triple, one column per sample.
struct EncodedTransitions {
  FeatureSpec features;
  Matrix sa;
  Matrix sp;

  Eigen::Index size() const { return sa.cols(); }
};

EncodedTransitions encode(const OfflineDataset& data);
EncodedTransitions encode(const ContinuousOfflineDataset& data);

/// T_Z(s'|s, phi(s,a)) proportional to rho(s') exp(-|phi(s,a) - psi(s')|^2), rho the empirical s' pool.
struct EnergyModel {
  FeatureSpec features;
  int embed_dim = 0;
  Mlp phi;
  Mlp psi;
  Matrix rho_pool;  // encoded candidate next states, one per column

  Eigen::Index parameter_count() const { return phi.parameter_count() + psi.parameter_count(); }
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  static EnergyModel create(const FeatureSpec& features, int embed_dim, const std::vector<int>& hidden, Rng& rng);
};

struct ContrastiveResult {
  double value = 0.0;
  Vector grad;  // [d/d phi params; d/d psi params]
};

/// L = mean_i [ |phi_i - psi(s'_i)|^2 / 2 + log (1/B) sum_j exp(-|phi_i - psi(c_j)|^2 / 2) ] over candidates c_j.
ContrastiveResult contrastive_loss(const EnergyModel& model, const Matrix& sa, const Matrix& sp, const Matrix& candidates,
                                   bool with_grad = true);

/// Explicit mean cross-entropy -log softmax of the true successor against the candidate pool,
/// where the true successor's logit is computed separately from the pool.
double enumerated_cross_entropy(const EnergyModel& model, const Matrix& sa, const Matrix& sp, const Matrix& candidates);

/// B columns drawn uniformly with replacement from `pool`.
Matrix sample_candidates(const Matrix& pool, int count, Rng& rng);

struct EbmConfig {
  int embed_dim = 8;
  std::vector<int> hidden{256, 256};
  int steps = 1000;
  int batch = 64;
  int negatives = 0;  // 0: in-batch successors; otherwise draws from the whole s' pool
  double lr = 3e-4;
  std::uint64_t seed = 0;
  int log_every = 100;
};

struct TrainLog {
  std::vector<std::pair<int, double>> entries;  // (step, mean loss since previous entry)
};

EnergyModel train_transition_ebm(const EncodedTransitions& data, const EbmConfig& cfg, TrainLog* log = nullptr);

/// phi(s, a) or, with an RFF layer, cos(W phi(s, a) + b) scaled; the map used to produce latent actions.
struct ActionEncoder {
  Mlp net;
  std::optional<RffMap> rff;

  int latent_dim() const { return rff ? static_cast<int>(rff->feature_dim()) : net.output_dim(); }
  Matrix encode(const Matrix& sa) const;
  /// Forward with tape; returns latent codes and keeps the pre-RFF output in `pre_rff`.
  Matrix encode(const Matrix& sa, Mlp::Tape& tape, Matrix& pre_rff) const;
  /// d loss / d net params from d loss / d latent codes.
  Vector backward(const Mlp::Tape& tape, const Matrix& pre_rff, const Matrix& upstream) const;
};

/// The transition model's phi encoder (optionally with a frozen RFF layer on top).
ActionEncoder action_encoder(const EnergyModel& model, std::optional<RffMap> rff = std::nullopt);

}  // namespace trail
