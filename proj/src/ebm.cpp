#include "trail/ebm.hpp"

namespace trail {

Matrix FeatureSpec::encode_states(const std::vector<int>& states) const {
  if (!tabular) throw ValidationError("FeatureSpec: index encoding requested for continuous features");
  Matrix out = Matrix::Zero(n_states, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) out(states[i], static_cast<Eigen::Index>(i)) = 1.0;
  return out;
}

Matrix FeatureSpec::encode_state_actions(const std::vector<int>& states, const std::vector<int>& actions) const {
  if (!tabular) throw ValidationError("FeatureSpec: index encoding requested for continuous features");
  require_dims(states.size() == actions.size(), "encode_state_actions: length mismatch");
  Matrix out = Matrix::Zero(sa_input_dim(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    out(states[i], static_cast<Eigen::Index>(i)) = 1.0;
    out(n_states + actions[i], static_cast<Eigen::Index>(i)) = 1.0;
  }
  return out;
}

EncodedTransitions encode(const OfflineDataset& data) {
  EncodedTransitions out;
  out.features = FeatureSpec::for_tabular(data.n_states, data.n_actions);
  std::vector<int> s, a, sp;
  for (const auto& t : data.triples) {
    s.push_back(t.s);
    a.push_back(t.a);
    sp.push_back(t.sp);
  }
  out.sa = out.features.encode_state_actions(s, a);
  out.sp = out.features.encode_states(sp);
  return out;
}

EncodedTransitions encode(const ContinuousOfflineDataset& data) {
  EncodedTransitions out;
  out.features = FeatureSpec::for_continuous(static_cast<int>(data.states.rows()), static_cast<int>(data.actions.rows()));
  out.sa.resize(data.states.rows() + data.actions.rows(), data.size());
  out.sa << data.states, data.actions;
  out.sp = data.next_states;
  return out;
}

Vector EnergyModel::parameters() const {
  Vector flat(parameter_count());
  flat << phi.parameters(), psi.parameters();
  return flat;
}

void EnergyModel::set_parameters(const Vector& flat) {
  require_dims(flat.size() == parameter_count(), "EnergyModel::set_parameters: wrong size");
  phi.set_parameters(flat.head(phi.parameter_count()));
  psi.set_parameters(flat.tail(psi.parameter_count()));
}

EnergyModel EnergyModel::create(const FeatureSpec& features, int embed_dim, const std::vector<int>& hidden, Rng& rng) {
  if (embed_dim <= 0) throw ValidationError("EnergyModel: embed_dim must be positive");
  EnergyModel model;
  model.features = features;
  model.embed_dim = embed_dim;
  model.phi = Mlp::make(features.sa_input_dim(), hidden, embed_dim, rng);
  model.psi = Mlp::make(features.state_input_dim(), hidden, embed_dim, rng);
  return model;
}

namespace {

// Pairwise half squared distances e(j, i) = |phi_i - psi_j|^2 / 2, candidates by rows.
Matrix half_sq_distances(const Matrix& phi, const Matrix& psi_c) {
  const Vector phi_sq = phi.colwise().squaredNorm().transpose();
  const Vector psi_sq = psi_c.colwise().squaredNorm().transpose();
  Matrix e = -(psi_c.transpose() * phi);
  e.colwise() += 0.5 * psi_sq;
  e.rowwise() += 0.5 * phi_sq.transpose();
  return e.cwiseMax(0.0);
}

}  // namespace

ContrastiveResult contrastive_loss(const EnergyModel& model, const Matrix& sa, const Matrix& sp, const Matrix& candidates,
                                   bool with_grad) {
  const Eigen::Index n = sa.cols();
  const Eigen::Index b = candidates.cols();
  if (n == 0) throw ValidationError("contrastive_loss: empty batch");
  if (b == 0) throw ValidationError("contrastive_loss: empty candidate pool");
  require_dims(sp.cols() == n, "contrastive_loss: sa and sp batch sizes differ");

  Mlp::Tape phi_tape;
  Mlp::Tape psi_tape;
  Matrix psi_in(sp.rows(), n + b);
  psi_in << sp, candidates;
  const Matrix phi = model.phi.forward(sa, phi_tape);
  const Matrix psi_all = model.psi.forward(psi_in, psi_tape);
  const Matrix psi_pos = psi_all.leftCols(n);
  const Matrix psi_c = psi_all.rightCols(b);

  const Matrix diff_pos = phi - psi_pos;
  const Matrix e = half_sq_distances(phi, psi_c);  // b x n

  // Stable log-mean-exp of -e per column.
  const Eigen::RowVectorXd min_e = e.colwise().minCoeff();
  Matrix w = (-(e.rowwise() - min_e)).array().exp();
  const Eigen::RowVectorXd sums = w.colwise().sum();
  const Eigen::RowVectorXd log_mean =
      -min_e.array() + sums.array().log() - std::log(static_cast<double>(b));

  ContrastiveResult result;
  result.value = (0.5 * diff_pos.colwise().squaredNorm().array() + log_mean.array()).mean();
  if (!std::isfinite(result.value)) throw NonFiniteError("contrastive_loss: non-finite loss");
  if (!with_grad) return result;

  w.array().rowwise() /= sums.array();  // softmax weights, columns sum to 1
  const double inv_n = 1.0 / static_cast<double>(n);
  // d/d phi_i = (phi_i - psi_pos_i) - sum_j w_ji (phi_i - psi_j)
  const Matrix weighted_psi = psi_c * w;  // d x n
  const Matrix d_phi = inv_n * (diff_pos - (phi - weighted_psi));
  Matrix d_psi(model.embed_dim, n + b);
  d_psi.leftCols(n) = -inv_n * diff_pos;
  // d/d psi_j = sum_i w_ji (phi_i - psi_j)
  const Vector w_row_sums = w.rowwise().sum();
  d_psi.rightCols(b) = inv_n * (phi * w.transpose() - psi_c * w_row_sums.asDiagonal());

  const auto g_phi = model.phi.backward(phi_tape, d_phi);
  const auto g_psi = model.psi.backward(psi_tape, d_psi);
  result.grad.resize(model.parameter_count());
  result.grad << g_phi.params, g_psi.params;
  return result;
}

double enumerated_cross_entropy(const EnergyModel& model, const Matrix& sa, const Matrix& sp, const Matrix& candidates) {
  const Matrix phi = model.phi.forward(sa);
  const Matrix psi_pos = model.psi.forward(sp);
  const Matrix psi_c = model.psi.forward(candidates);
  double total = 0.0;
  for (Eigen::Index i = 0; i < sa.cols(); ++i) {
    const double true_logit = -0.5 * (phi.col(i) - psi_pos.col(i)).squaredNorm();
    double denom = 0.0;
    for (Eigen::Index j = 0; j < psi_c.cols(); ++j) {
      denom += std::exp(-0.5 * (phi.col(i) - psi_c.col(j)).squaredNorm());
    }
    total += -(true_logit - std::log(denom));
  }
  return total / static_cast<double>(sa.cols());
}

Matrix sample_candidates(const Matrix& pool, int count, Rng& rng) {
  if (pool.cols() == 0) throw ValidationError("sample_candidates: empty pool");
  Matrix out(pool.rows(), count);
  for (int j = 0; j < count; ++j) out.col(j) = pool.col(rng.uniform_int(static_cast<int>(pool.cols())));
  return out;
}

EnergyModel train_transition_ebm(const EncodedTransitions& data, const EbmConfig& cfg, TrainLog* log) {
  if (data.size() == 0) throw ValidationError("train_transition_ebm: empty dataset");
  if (cfg.batch <= 0 || cfg.steps < 0 || cfg.negatives < 0) throw ValidationError("train_transition_ebm: bad config");
  Rng init_rng(derive_seed(cfg.seed, 0x696e6974));
  EnergyModel model = EnergyModel::create(data.features, cfg.embed_dim, cfg.hidden, init_rng);
  model.rho_pool = data.sp;

  Vector params = model.parameters();
  OptState opt = OptState::for_params(params.size(), cfg.lr);
  const int n = static_cast<int>(data.size());
  const int batch = std::min(cfg.batch, n);
  Matrix sa(data.sa.rows(), batch);
  Matrix sp(data.sp.rows(), batch);
  double running = 0.0;
  int running_count = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    Rng rng(derive_seed(cfg.seed, 0x62617463, static_cast<std::uint64_t>(step)));
    for (int i = 0; i < batch; ++i) {
      const int idx = rng.uniform_int(n);
      sa.col(i) = data.sa.col(idx);
      sp.col(i) = data.sp.col(idx);
    }
    const Matrix candidates = cfg.negatives == 0 ? sp : sample_candidates(data.sp, cfg.negatives, rng);
    ContrastiveResult res;
    try {
      res = contrastive_loss(model, sa, sp, candidates);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("train_transition_ebm: diverged at step " + std::to_string(step) + ": " + e.what());
    }
    if (!res.grad.allFinite()) {
      throw NonFiniteError("train_transition_ebm: non-finite gradient at step " + std::to_string(step));
    }
    opt_step(opt, params, res.grad);
    model.set_parameters(params);
    running += res.value;
    ++running_count;
    if (log != nullptr && cfg.log_every > 0 && ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      log->entries.emplace_back(step + 1, running / running_count);
      running = 0.0;
      running_count = 0;
    }
  }
  return model;
}

Matrix ActionEncoder::encode(const Matrix& sa) const {
  const Matrix out = net.forward(sa);
  return rff ? rff_features(out, *rff) : out;
}

Matrix ActionEncoder::encode(const Matrix& sa, Mlp::Tape& tape, Matrix& pre_rff) const {
  pre_rff = net.forward(sa, tape);
  return rff ? rff_features(pre_rff, *rff) : pre_rff;
}

Vector ActionEncoder::backward(const Mlp::Tape& tape, const Matrix& pre_rff, const Matrix& upstream) const {
  const Matrix d_pre = rff ? rff_backward(pre_rff, *rff, upstream) : upstream;
  return net.backward(tape, d_pre).params;
}

ActionEncoder action_encoder(const EnergyModel& model, std::optional<RffMap> rff) {
  if (rff) require_dims(rff->input_dim() == model.embed_dim, "action_encoder: RFF input dim must equal embed_dim");
  return ActionEncoder{model.phi, std::move(rff)};
}

}  // namespace trail
