#include "trail/policy.hpp"

#include <algorithm>
#include <numbers>

namespace trail {

void TabularDecoder::validate() const {
  require_dims(probs.rows() == static_cast<Eigen::Index>(n_states) * n_latent && probs.cols() == n_actions,
               "TabularDecoder: table must be (|S|*|Z|) x |A|");
  check_stochastic_rows(probs, "TabularDecoder", 1e-9);
}

void TabularLatent::validate() const { check_stochastic_rows(probs, "TabularLatent", 1e-9); }

double gaussian_nll(const Matrix& outputs, const Matrix& targets, Matrix* upstream) {
  const Eigen::Index k = targets.rows();
  const Eigen::Index n = targets.cols();
  require_dims(outputs.rows() == 2 * k && outputs.cols() == n, "gaussian_nll: outputs must be [mean; log_std]");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  if (upstream != nullptr) upstream->resize(2 * k, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double raw = outputs(k + j, i);
      const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
      const double inv_std = std::exp(-log_std);
      const double r = (targets(j, i) - outputs(j, i)) * inv_std;
      total += 0.5 * r * r + log_std + half_log_2pi;
      if (upstream != nullptr) {
        (*upstream)(j, i) = -r * inv_std / static_cast<double>(n);
        const bool inside = raw > kLogStdMin && raw < kLogStdMax;
        (*upstream)(k + j, i) = inside ? (1.0 - r * r) / static_cast<double>(n) : 0.0;
      }
    }
  }
  const double value = total / static_cast<double>(n);
  if (!std::isfinite(value)) throw NonFiniteError("gaussian_nll: non-finite loss");
  return value;
}

namespace {

// Shared -log p loss over table lookups; `index(i)` returns (row, col) of the i-th event.
template <typename IndexFn>
LossReport table_nll(const Matrix& table, std::size_t n, IndexFn&& index) {
  if (n == 0) throw ValidationError("empty batch");
  LossReport report;
  report.grad = Vector::Zero(table.size());
  Eigen::Map<Matrix> grad(report.grad.data(), table.rows(), table.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [r, c] = index(i);
    const double p = table(r, c);
    if (p < kProbFloor) {
      ++report.floor_events;
      report.value -= std::log(kProbFloor) * inv_n;
    } else {
      report.value -= std::log(p) * inv_n;
      grad(r, c) -= inv_n / p;
    }
  }
  return report;
}

Matrix gather_columns(const Matrix& src, const std::vector<int>& idx) {
  Matrix out(src.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = src.col(idx[i]);
  return out;
}

std::vector<int> draw_batch(std::uint64_t seed, std::uint64_t stream, int step, int n, int batch) {
  Rng rng(derive_seed(seed, stream, static_cast<std::uint64_t>(step)));
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = rng.uniform_int(n);
  return idx;
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

void fallback_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, const LatentMap& phi, int s, int z) {
  row.setZero();
  int members = 0;
  for (int a = 0; a < phi.n_actions(); ++a) {
    if (phi(s, a) == z) {
      row(a) = 1.0;
      ++members;
    }
  }
  if (members == 0) {
    row.setConstant(1.0 / static_cast<double>(row.size()));
  } else {
    row /= static_cast<double>(members);
  }
}

}  // namespace

LossReport decoder_loss(const std::vector<StateAction>& pairs, const TabularDecoder& decoder, const LatentMap& phi) {
  return table_nll(decoder.probs, pairs.size(), [&](std::size_t i) {
    const auto& p = pairs[i];
    return std::pair<Eigen::Index, Eigen::Index>(static_cast<Eigen::Index>(p.s) * decoder.n_latent + phi(p.s, p.a), p.a);
  });
}

LossReport decoder_loss(const Matrix& states, const Matrix& actions, const Matrix& z, const GaussianDecoder& decoder) {
  require_dims(states.cols() == actions.cols() && states.cols() == z.cols(), "decoder_loss: batch sizes differ");
  Mlp::Tape tape;
  const Matrix out = decoder.net.forward(stack_rows(states, z), tape);
  Matrix upstream;
  LossReport report;
  report.value = gaussian_nll(out, actions, &upstream);
  auto grads = decoder.net.backward(tape, upstream);
  report.grad = std::move(grads.params);
  report.grad_latent = grads.input.bottomRows(z.rows());
  return report;
}

TabularDecoder train_action_decoder(const OfflineDataset& offline, const LatentMap& phi, const ExpertDataset* finetune) {
  require_dims(phi.n_states() == offline.n_states && phi.n_actions() == offline.n_actions,
               "train_action_decoder: phi shape does not match data");
  TabularDecoder dec;
  dec.n_states = offline.n_states;
  dec.n_latent = phi.n_latent;
  dec.n_actions = offline.n_actions;
  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(dec.n_states) * dec.n_latent, dec.n_actions);
  for (const auto& t : offline.triples) counts(static_cast<Eigen::Index>(t.s) * dec.n_latent + phi(t.s, t.a), t.a) += 1.0;
  if (finetune != nullptr) {
    for (const auto& p : finetune->pairs) counts(static_cast<Eigen::Index>(p.s) * dec.n_latent + phi(p.s, p.a), p.a) += 1.0;
  }
  dec.probs = counts;
  for (int s = 0; s < dec.n_states; ++s) {
    for (int z = 0; z < dec.n_latent; ++z) {
      auto row = dec.probs.row(static_cast<Eigen::Index>(s) * dec.n_latent + z);
      const double total = row.sum();
      if (total > 0.0) {
        row /= total;
      } else {
        fallback_row(row, phi, s, z);
      }
    }
  }
  return dec;
}

GaussianDecoder train_action_decoder(const ContinuousOfflineDataset& offline, ActionEncoder& encoder,
                                     const DecoderConfig& cfg, const ContinuousExpertDataset* finetune) {
  if (offline.size() == 0) throw ValidationError("train_action_decoder: empty dataset");
  GaussianDecoder dec;
  dec.state_dim = static_cast<int>(offline.states.rows());
  dec.latent_dim = encoder.latent_dim();
  dec.action_dim = static_cast<int>(offline.actions.rows());
  Rng init(derive_seed(cfg.seed, 0x646563));
  dec.net = Mlp::make(dec.state_dim + dec.latent_dim, cfg.hidden, 2 * dec.action_dim, init);

  Vector params = dec.net.parameters();
  OptState opt = OptState::for_params(params.size(), cfg.lr);
  Vector enc_params = encoder.net.parameters();
  OptState enc_opt = OptState::for_params(enc_params.size(), cfg.lr);

  auto run_phase = [&](const Matrix& states, const Matrix& actions, int steps, std::uint64_t stream) {
    const int n = static_cast<int>(states.cols());
    const int batch = std::min(cfg.batch, n);
    const Matrix sa_all = stack_rows(states, actions);
    const Matrix z_all = cfg.joint_phi ? Matrix() : encoder.encode(sa_all);
    for (int step = 0; step < steps; ++step) {
      const auto idx = draw_batch(cfg.seed, stream, step, n, batch);
      const Matrix s = gather_columns(states, idx);
      const Matrix a = gather_columns(actions, idx);
      if (!cfg.joint_phi) {
        const auto rep = decoder_loss(s, a, gather_columns(z_all, idx), dec);
        opt_step(opt, params, rep.grad);
        dec.net.set_parameters(params);
        continue;
      }
      Mlp::Tape tape;
      Matrix pre;
      const Matrix z = encoder.encode(gather_columns(sa_all, idx), tape, pre);
      const auto rep = decoder_loss(s, a, z, dec);
      const Vector enc_grad = encoder.backward(tape, pre, rep.grad_latent);
      opt_step(opt, params, rep.grad);
      dec.net.set_parameters(params);
      opt_step(enc_opt, enc_params, enc_grad);
      encoder.net.set_parameters(enc_params);
    }
  };
  run_phase(offline.states, offline.actions, cfg.steps, 0x64656331);
  if (finetune != nullptr && finetune->size() > 0) {
    run_phase(finetune->states, finetune->actions, std::max(1, cfg.steps / 4), 0x64656332);
  }
  return dec;
}

LossReport latent_bc_nll(const std::vector<StateAction>& pairs, const TabularLatent& latent, const LatentMap& phi) {
  return table_nll(latent.probs, pairs.size(), [&](std::size_t i) {
    const auto& p = pairs[i];
    return std::pair<Eigen::Index, Eigen::Index>(p.s, phi(p.s, p.a));
  });
}

LossReport latent_bc_nll(const Matrix& states, const Matrix& z, const GaussianLatent& latent) {
  require_dims(states.cols() == z.cols(), "latent_bc_nll: batch sizes differ");
  require_dims(z.rows() == latent.latent_dim, "latent_bc_nll: latent dimension mismatch");
  Mlp::Tape tape;
  const Matrix out = latent.net.forward(states, tape);
  Matrix upstream;
  LossReport report;
  report.value = gaussian_nll(out, z, &upstream);
  report.grad = latent.net.backward(tape, upstream).params;
  return report;
}

GaussianLatent train_gaussian_latent(const Matrix& states, const Matrix& z, const LatentConfig& cfg) {
  if (states.cols() == 0) throw ValidationError("train_gaussian_latent: empty dataset");
  GaussianLatent latent;
  latent.latent_dim = static_cast<int>(z.rows());
  Rng init(derive_seed(cfg.seed, 0x6c6174));
  latent.net = Mlp::make(static_cast<int>(states.rows()), cfg.hidden, 2 * latent.latent_dim, init);
  Vector params = latent.net.parameters();
  OptState opt = OptState::for_params(params.size(), cfg.lr);
  const int n = static_cast<int>(states.cols());
  const int batch = std::min(cfg.batch, n);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto idx = draw_batch(cfg.seed, 0x6c617431, step, n, batch);
    const auto rep = latent_bc_nll(gather_columns(states, idx), gather_columns(z, idx), latent);
    opt_step(opt, params, rep.grad);
    latent.net.set_parameters(params);
  }
  return latent;
}

MseReport latent_mse_loss(const std::vector<int>& states, const Matrix& targets, const Matrix& theta) {
  require_dims(static_cast<Eigen::Index>(states.size()) == targets.cols(), "latent_mse_loss: batch sizes differ");
  require_dims(targets.rows() == theta.rows(), "latent_mse_loss: latent dimension mismatch");
  if (states.empty()) throw ValidationError("latent_mse_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(states.size());
  MseReport report;
  Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Vector diff = theta.col(states[i]) - targets.col(static_cast<Eigen::Index>(i));
    report.value += diff.squaredNorm() * inv_n;
    grad.col(states[i]) += 2.0 * inv_n * diff;
  }
  if (!std::isfinite(report.value)) throw NonFiniteError("latent_mse_loss: non-finite loss");
  report.grad_l1 = grad.cwiseAbs().sum();
  report.grad = Eigen::Map<const Vector>(grad.data(), grad.size());
  return report;
}

MseReport latent_mse_loss(const Matrix& states, const Matrix& targets, const Mlp& theta) {
  require_dims(states.cols() == targets.cols(), "latent_mse_loss: batch sizes differ");
  Mlp::Tape tape;
  const Matrix out = theta.forward(states, tape);
  require_dims(out.rows() == targets.rows(), "latent_mse_loss: latent dimension mismatch");
  const Matrix diff = out - targets;
  const double inv_n = 1.0 / static_cast<double>(states.cols());
  MseReport report;
  report.value = diff.squaredNorm() * inv_n;
  if (!std::isfinite(report.value)) throw NonFiniteError("latent_mse_loss: non-finite loss");
  report.grad = theta.backward(tape, 2.0 * inv_n * diff).params;
  report.grad_l1 = report.grad.cwiseAbs().sum();
  return report;
}

Matrix fit_tabular_theta(const std::vector<int>& states, const Matrix& targets, int n_states) {
  Matrix theta = Matrix::Zero(targets.rows(), n_states);
  Vector counts = Vector::Zero(n_states);
  for (std::size_t i = 0; i < states.size(); ++i) {
    theta.col(states[i]) += targets.col(static_cast<Eigen::Index>(i));
    counts(states[i]) += 1.0;
  }
  for (int s = 0; s < n_states; ++s) {
    if (counts(s) > 0.0) theta.col(s) /= counts(s);
  }
  return theta;
}

DeterministicLatent train_deterministic_latent(const Matrix& states, const Matrix& targets, const LatentConfig& cfg) {
  if (states.cols() == 0) throw ValidationError("train_deterministic_latent: empty dataset");
  DeterministicLatent latent;
  latent.tabular = false;
  Rng init(derive_seed(cfg.seed, 0x746874));
  latent.net = Mlp::make(static_cast<int>(states.rows()), cfg.hidden, static_cast<int>(targets.rows()), init);
  Vector params = latent.net.parameters();
  OptState opt = OptState::for_params(params.size(), cfg.lr);
  const int n = static_cast<int>(states.cols());
  const int batch = std::min(cfg.batch, n);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto idx = draw_batch(cfg.seed, 0x74687431, step, n, batch);
    const auto rep = latent_mse_loss(gather_columns(states, idx), gather_columns(targets, idx), latent.net);
    opt_step(opt, params, rep.grad);
    latent.net.set_parameters(params);
  }
  return latent;
}

TabularPolicy compose_policy(const TabularLatent& latent, const TabularDecoder& decoder) {
  require_dims(latent.n_states() == decoder.n_states && latent.n_latent() == decoder.n_latent,
               "compose_policy: latent policy and decoder shapes differ");
  Matrix probs = Matrix::Zero(decoder.n_states, decoder.n_actions);
  for (int s = 0; s < decoder.n_states; ++s) {
    for (int z = 0; z < decoder.n_latent; ++z) probs.row(s) += latent.probs(s, z) * decoder.row(s, z);
  }
  return TabularPolicy(std::move(probs), 1e-9);
}

namespace {

Vector as_state_vector(const Observation& obs, int dim) {
  if (const auto* v = std::get_if<Vector>(&obs)) {
    require_dims(v->size() == dim, "infer_action: observation has wrong dimension");
    return *v;
  }
  const int s = std::get<int>(obs);
  if (s < 0 || s >= dim) throw ValidationError("infer_action: state index out of range");
  Vector x = Vector::Zero(dim);
  x(s) = 1.0;
  return x;
}

Vector sample_gaussian(const Vector& out, Rng& rng, bool sample) {
  const Eigen::Index k = out.size() / 2;
  Vector x = out.head(k);
  if (!sample) return x;
  for (Eigen::Index j = 0; j < k; ++j) x(j) += std::exp(std::clamp(out(k + j), kLogStdMin, kLogStdMax)) * rng.normal();
  return x;
}

}  // namespace

Action infer_action(const Observation& obs, const LatentPolicy& latent, const ActionDecoder& decoder, Rng& rng,
                    bool sample_decoder) {
  if (const auto* tab = std::get_if<TabularLatent>(&latent)) {
    const auto* dec = std::get_if<TabularDecoder>(&decoder);
    if (dec == nullptr) throw ValidationError("infer_action: tabular latent policy needs a tabular decoder");
    const auto* s = std::get_if<int>(&obs);
    if (s == nullptr) throw ValidationError("infer_action: tabular latent policy needs a state index");
    if (*s < 0 || *s >= tab->n_states()) throw ValidationError("infer_action: state index out of range");
    const int z = rng.categorical(tab->probs.row(*s).transpose());
    return rng.categorical(dec->row(*s, z).transpose());
  }
  const auto* dec = std::get_if<GaussianDecoder>(&decoder);
  if (dec == nullptr) throw ValidationError("infer_action: continuous latent policy needs a Gaussian decoder");
  const Vector state = as_state_vector(obs, dec->state_dim);
  Vector z;
  if (const auto* gauss = std::get_if<GaussianLatent>(&latent)) {
    z = sample_gaussian(gauss->net.forward(state), rng, true);
  } else {
    const auto& det = std::get<DeterministicLatent>(latent);
    if (det.tabular) {
      const auto* s = std::get_if<int>(&obs);
      if (s == nullptr) throw ValidationError("infer_action: tabular theta needs a state index");
      z = det.theta.col(*s);
    } else {
      z = det.net.forward(state);
    }
  }
  require_dims(z.size() == dec->latent_dim, "infer_action: latent dimension does not match decoder");
  Vector input(state.size() + z.size());
  input << state, z;
  return sample_gaussian(dec->net.forward(input), rng, sample_decoder);
}

}  // namespace trail
