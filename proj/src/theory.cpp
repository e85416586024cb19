#include "trail/theory.hpp"

#include "trail/reparam.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace trail {

namespace {

constexpr double kCoverageTol = 1e-12;

void check_latent_map(const LatentMap& phi, int n_states, int n_actions) {
  require_dims(phi.n_states() == n_states && phi.n_actions() == n_actions, "latent map shape does not match the MDP");
  if (phi.n_latent <= 0) throw ValidationError("latent map: n_latent must be positive");
  if ((phi.table.array() < 0).any() || (phi.table.array() >= phi.n_latent).any()) {
    throw ValidationError("latent map: code out of range");
  }
}

// Zero out numerically-zero visitation mass on states the offline distribution never covers.
void check_coverage(const Vector& d_star, const Vector& d_off) {
  for (Eigen::Index s = 0; s < d_star.size(); ++s) {
    if (d_star(s) > kCoverageTol && d_off(s) <= 0.0) {
      std::ostringstream msg;
      msg << "coverage violated: expert visits state " << s << " (mass " << d_star(s)
          << ") with zero offline mass";
      throw ValidationError(msg.str());
    }
  }
}

double chi2_on_support(const Vector& p, const Vector& q) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (q(i) <= 0.0) continue;  // coverage already checked; p(i) is numerically zero here
    const double diff = p(i) - q(i);
    total += diff * diff / q(i);
  }
  return total;
}

}  // namespace

Matrix offline_joint(const Vector& d_off, int n_actions) {
  if (n_actions <= 0) throw ValidationError("offline_joint: n_actions must be positive");
  return d_off.replicate(1, n_actions) / static_cast<double>(n_actions);
}

OptimalDecoder optimal_decoder(const Matrix& joint, const LatentMap& phi) {
  const int nS = static_cast<int>(joint.rows());
  const int nA = static_cast<int>(joint.cols());
  check_latent_map(phi, nS, nA);
  const int nZ = phi.n_latent;

  OptimalDecoder out;
  out.decoder.n_states = nS;
  out.decoder.n_latent = nZ;
  out.decoder.n_actions = nA;
  out.decoder.probs = Matrix::Zero(static_cast<Eigen::Index>(nS) * nZ, nA);
  out.realized = decltype(out.realized)::Constant(nS, nZ, false);

  for (int s = 0; s < nS; ++s) {
    for (int a = 0; a < nA; ++a) out.realized(s, phi(s, a)) = true;
    for (int z = 0; z < nZ; ++z) {
      auto row = out.decoder.probs.row(static_cast<Eigen::Index>(s) * nZ + z);
      double total = 0.0;
      for (int a = 0; a < nA; ++a) {
        if (phi(s, a) == z) {
          row(a) = joint(s, a);
          total += joint(s, a);
        }
      }
      if (total > 0.0) {
        row /= total;
        continue;
      }
      ++out.fallback_cells;
      if (out.realized(s, z)) {
        for (int a = 0; a < nA; ++a) row(a) = phi(s, a) == z ? 1.0 : 0.0;
        row /= row.sum();
      } else {
        row.setConstant(1.0 / nA);
      }
    }
  }
  return out;
}

TabularLatent marginalize_policy(const TabularPolicy& pi, const LatentMap& phi) {
  check_latent_map(phi, pi.n_states(), pi.n_actions());
  TabularLatent out{Matrix::Zero(pi.n_states(), phi.n_latent)};
  for (int s = 0; s < pi.n_states(); ++s) {
    for (int a = 0; a < pi.n_actions(); ++a) out.probs(s, phi(s, a)) += pi(s, a);
  }
  return out;
}

TabularLatent tabular_latent_bc(const ExpertDataset& expert, const LatentMap& phi, int n_latent, double prior_count) {
  require_dims(phi.n_states() == expert.n_states && phi.n_actions() == expert.n_actions,
               "tabular_latent_bc: latent map shape does not match the dataset");
  if (prior_count < 0.0) throw ValidationError("tabular_latent_bc: prior_count must be nonnegative");
  Matrix counts = Matrix::Constant(expert.n_states, n_latent, prior_count);
  for (const auto& p : expert.pairs) counts(p.s, phi(p.s, p.a)) += 1.0;
  for (int s = 0; s < expert.n_states; ++s) {
    const double total = counts.row(s).sum();
    if (total > 0.0) {
      counts.row(s) /= total;
    } else {
      counts.row(s).setConstant(1.0 / n_latent);
    }
  }
  return TabularLatent{std::move(counts)};
}

PretrainingTerms pretraining_terms(const TabularMdp& mdp, const Vector& d_star, const DistVector& d_off,
                                   const LatentMap& phi, const Matrix& t_z, const TabularDecoder& decoder) {
  const int nS = mdp.n_states();
  const int nA = mdp.n_actions();
  check_latent_map(phi, nS, nA);
  require_dims(d_off.size() == nS, "pretraining_terms: d_off has the wrong size");
  require_dims(decoder.n_states == nS && decoder.n_actions == nA && decoder.n_latent == phi.n_latent,
               "pretraining_terms: decoder shape does not match");
  check_coverage(d_star, d_off.probs());

  PretrainingTerms t;
  t.j_t = transition_representation_error(mdp.transition(), d_off.probs(), phi, t_z);

  const Matrix joint = offline_joint(d_off.probs(), nA);
  const OptimalDecoder best = optimal_decoder(joint, phi);
  for (int s = 0; s < nS; ++s) {
    if (d_off(s) <= 0.0) continue;
    double worst = 0.0;
    for (int z = 0; z < phi.n_latent; ++z) {
      if (!best.realized(s, z)) continue;
      double kl = 0.0;
      try {
        kl = kl_divergence(best.decoder.row(s, z), decoder.row(s, z));
      } catch (const SupportError&) {
        std::ostringstream msg;
        msg << "decoding error is infinite at state " << s << ", latent " << z;
        throw SupportError(msg.str());
      }
      worst = std::max(worst, kl);
    }
    t.j_de_max += d_off(s) * worst;
    for (int a = 0; a < nA; ++a) {
      const double p = std::max(decoder(s, phi(s, a), a), kProbFloor);
      t.j_de -= joint(s, a) * std::log(p);
    }
  }

  t.chi2 = chi2_on_support(d_star, d_off.probs());
  t.c3 = mdp.gamma() / (1.0 - mdp.gamma());
  t.c2 = t.c3 * (1.0 + std::sqrt(t.chi2));
  t.c1 = nA * t.c2;
  return t;
}

BoundReport theorem1_report(const TabularMdp& mdp, const TabularPolicy& pi_star, const DistVector& d_off,
                            const LatentMap& phi, const Matrix& t_z, const TabularDecoder& decoder,
                            const TabularLatent& latent) {
  require_dims(latent.n_states() == mdp.n_states() && latent.n_latent() == phi.n_latent,
               "theorem1_report: latent policy shape does not match");
  const Vector d_star = state_visitation(mdp, pi_star).probs();
  const PretrainingTerms t = pretraining_terms(mdp, d_star, d_off, phi, t_z, decoder);

  BoundReport r;
  r.j_t = t.j_t;
  r.j_de_max = t.j_de_max;
  r.j_de = t.j_de;
  r.c1 = t.c1;
  r.c2 = t.c2;
  r.c3 = t.c3;
  r.chi2 = t.chi2;

  const TabularLatent star_z = marginalize_policy(pi_star, phi);
  const OptimalDecoder best = optimal_decoder(offline_joint(d_off.probs(), mdp.n_actions()), phi);
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (d_star(s) <= 0.0) continue;
    try {
      r.j_bc_kl += d_star(s) * kl_divergence(star_z.probs.row(s), latent.probs.row(s));
    } catch (const SupportError&) {
      std::ostringstream msg;
      msg << "latent BC error is infinite at state " << s;
      throw SupportError(msg.str());
    }
    for (int z = 0; z < phi.n_latent; ++z) {
      if (!best.realized(s, z)) r.unrealized_latent_mass += d_star(s) * latent.probs(s, z);
    }
  }

  r.lhs = policy_diff(mdp, compose_policy(latent, decoder), pi_star);
  r.rhs = t.transition_term() + t.decoding_term() + r.c3 * std::sqrt(0.5 * r.j_bc_kl);
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

nlohmann::json to_json(const BoundReport& r) {
  return {{"J_T", r.j_t},   {"J_DE_max", r.j_de_max}, {"J_DE", r.j_de}, {"J_BC_KL", r.j_bc_kl},
          {"C1", r.c1},     {"C2", r.c2},             {"C3", r.c3},     {"chi2", r.chi2},
          {"lhs", r.lhs},   {"rhs", r.rhs},           {"holds", r.holds},
          {"unrealized_latent_mass", r.unrealized_latent_mass}};
}

std::vector<SweepRow> theorem2_sweep(const TabularMdp& mdp, const TabularPolicy& pi_star, const DistVector& d_off,
                                     const LatentMap& phi, const Matrix& t_z, const TabularDecoder& decoder,
                                     const SweepConfig& cfg) {
  if (cfg.resamples <= 0) throw ValidationError("sweep: resamples must be positive");
  const Vector d_star = state_visitation(mdp, pi_star).probs();
  const PretrainingTerms t = pretraining_terms(mdp, d_star, d_off, phi, t_z, decoder);
  const double pretrain = t.transition_term() + t.decoding_term();

  std::vector<SweepRow> rows;
  for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    const std::size_t n = cfg.n_grid[gi];
    if (n == 0) throw ValidationError("sweep: n must be positive");
    std::vector<double> diffs(static_cast<std::size_t>(cfg.resamples));
    for (int r = 0; r < cfg.resamples; ++r) {
      const ExpertDataset expert = generate_expert(mdp, pi_star, n, derive_seed(cfg.seed, n, static_cast<std::uint64_t>(r)));
      const TabularLatent latent = tabular_latent_bc(expert, phi, phi.n_latent, cfg.prior_count);
      diffs[static_cast<std::size_t>(r)] = policy_diff(mdp, compose_policy(latent, decoder), pi_star);
    }
    SweepRow row;
    row.n = n;
    const double k = static_cast<double>(diffs.size());
    row.mean_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / k;
    double var = 0.0;
    for (double d : diffs) var += (d - row.mean_diff) * (d - row.mean_diff);
    row.stderr_diff = diffs.size() > 1 ? std::sqrt(var / (k - 1.0) / k) : 0.0;
    row.bound = pretrain + t.c3 * std::sqrt(static_cast<double>(phi.n_latent) * mdp.n_states() / static_cast<double>(n));
    row.holds = row.mean_diff <= row.bound + 1e-9;
    rows.push_back(row);
  }
  return rows;
}

double loglog_slope(const std::vector<SweepRow>& rows) {
  if (rows.size() < 2) throw ValidationError("loglog_slope: need at least two rows");
  Vector x(static_cast<Eigen::Index>(rows.size()));
  Vector y(x.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].mean_diff <= 0.0) throw ValidationError("loglog_slope: nonpositive mean Diff");
    x(static_cast<Eigen::Index>(i)) = std::log(static_cast<double>(rows[i].n));
    y(static_cast<Eigen::Index>(i)) = std::log(rows[i].mean_diff);
  }
  const Vector xc = x.array() - x.mean();
  return xc.dot(y.array().matrix() - Vector::Constant(y.size(), y.mean())) / xc.squaredNorm();
}

// ---- linear MDPs ----

Matrix LinearMdpSpec::embeddings_at(int s) const {
  Matrix out(d, n_actions);
  for (int a = 0; a < n_actions; ++a) out.col(a) = embedding(s, a).transpose();
  return out;
}

LinearInstance build_linear_mdp(int n_states, int n_actions, int d, std::uint64_t seed, double gamma) {
  if (n_states <= 0 || n_actions <= 0 || d <= 0) throw ValidationError("linear MDP: sizes must be positive");
  Rng rng(derive_seed(seed, 0x6c696e));
  LinearMdpSpec spec;
  spec.n_states = n_states;
  spec.n_actions = n_actions;
  spec.d = d;
  spec.W.resize(n_states, d);
  for (int j = 0; j < d; ++j) spec.W.col(j) = rng.dirichlet(n_states);
  spec.Phi.resize(static_cast<Eigen::Index>(n_states) * n_actions, d);
  for (Eigen::Index r = 0; r < spec.Phi.rows(); ++r) spec.Phi.row(r) = rng.dirichlet(d).transpose();
  spec.w_inf = spec.W.cwiseAbs().maxCoeff();
  spec.c4 = 0.25 * n_states * spec.w_inf;

  Matrix transition = spec.Phi * spec.W.transpose();
  // Rows are exact convex combinations; renormalize away rounding so validation is tight.
  for (Eigen::Index r = 0; r < transition.rows(); ++r) transition.row(r) /= transition.row(r).sum();
  TabularMdp mdp(n_states, n_actions, std::move(transition), rng.dirichlet(n_states), gamma);
  return LinearInstance{std::move(mdp), std::move(spec)};
}

LatentMap embedding_labels(const LinearMdpSpec& spec) {
  LatentMap phi;
  phi.n_latent = spec.n_actions;
  phi.table.resize(spec.n_states, spec.n_actions);
  for (int s = 0; s < spec.n_states; ++s) {
    for (int a = 0; a < spec.n_actions; ++a) {
      int label = a;
      for (int b = 0; b < a; ++b) {
        if (spec.embedding(s, b) == spec.embedding(s, a)) {
          label = b;
          break;
        }
      }
      phi.table(s, a) = label;
    }
  }
  return phi;
}

Vector simplex_weights(const Matrix& points, const Vector& z) {
  require_dims(points.rows() == z.size(), "simplex_weights: dimension mismatch");
  const Eigen::Index k = points.cols();
  if (k == 0) throw ValidationError("simplex_weights: no points");
  if (k > 16) throw ValidationError("simplex_weights: at most 16 points supported");
  // Exact: the optimum is the equality-constrained least-squares solution on its support, so try every
  // support and keep the best feasible one (ties go to the earliest subset).
  Vector best = Vector::Constant(k, 1.0 / static_cast<double>(k));
  double best_res = (points * best - z).squaredNorm();
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (mask & (1u << j)) idx.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(idx.size());
    Matrix kkt = Matrix::Zero(m + 1, m + 1);
    Vector rhs(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) kkt(i, j) = 2.0 * points.col(idx[i]).dot(points.col(idx[j]));
      kkt(i, m) = 1.0;
      kkt(m, i) = 1.0;
      rhs(i) = 2.0 * points.col(idx[i]).dot(z);
    }
    rhs(m) = 1.0;
    const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Vector lambda = Vector::Zero(k);
    bool feasible = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (sol(i) < -1e-12) feasible = false;
      lambda(idx[i]) = std::max(sol(i), 0.0);
    }
    if (!feasible || std::abs(lambda.sum() - 1.0) > 1e-9) continue;
    lambda /= lambda.sum();
    const double res = (points * lambda - z).squaredNorm();
    if (res < best_res - 1e-15) {
      best_res = res;
      best = lambda;
    }
  }
  return best;
}

TabularPolicy decode_theta_policy(const LinearMdpSpec& spec, const Matrix& theta, const TabularDecoder& decoder,
                                  ThetaDecoding mode, double* max_residual) {
  require_dims(theta.rows() == spec.d && theta.cols() == spec.n_states, "decode_theta_policy: theta must be d x |S|");
  require_dims(decoder.n_states == spec.n_states && decoder.n_actions == spec.n_actions &&
                   decoder.n_latent == spec.n_actions,
               "decode_theta_policy: decoder must be indexed by embedding labels");
  const LatentMap labels = embedding_labels(spec);
  Matrix probs = Matrix::Zero(spec.n_states, spec.n_actions);
  double residual = 0.0;
  for (int s = 0; s < spec.n_states; ++s) {
    const Matrix points = spec.embeddings_at(s);
    Vector lambda;
    if (mode == ThetaDecoding::Barycentric) {
      lambda = simplex_weights(points, theta.col(s));
    } else {
      Eigen::Index nearest = 0;
      (points.colwise() - theta.col(s)).colwise().squaredNorm().minCoeff(&nearest);
      lambda = Vector::Unit(spec.n_actions, nearest);
    }
    residual = std::max(residual, (points * lambda - theta.col(s)).norm());
    for (int a = 0; a < spec.n_actions; ++a) probs.row(s) += lambda(a) * decoder.row(s, labels(s, a));
  }
  if (max_residual) *max_residual = residual;
  for (int s = 0; s < spec.n_states; ++s) probs.row(s) /= probs.row(s).sum();
  return TabularPolicy(std::move(probs), 1e-9);
}

Matrix population_mse_gradient(const LinearMdpSpec& spec, const Vector& d_star, const TabularPolicy& pi_star,
                               const Matrix& theta) {
  require_dims(theta.rows() == spec.d && theta.cols() == spec.n_states, "population gradient: theta must be d x |S|");
  Matrix grad(spec.d, spec.n_states);
  for (int s = 0; s < spec.n_states; ++s) {
    Vector mean = Vector::Zero(spec.d);
    for (int a = 0; a < spec.n_actions; ++a) mean += pi_star(s, a) * spec.embedding(s, a).transpose();
    grad.col(s) = 2.0 * d_star(s) * (theta.col(s) - mean);
  }
  return grad;
}

Theorem3Report theorem3_report(const LinearMdpSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi_star,
                               const DistVector& d_off, const Matrix& theta, const TabularDecoder& decoder,
                               ThetaDecoding mode) {
  const Vector d_star = state_visitation(mdp, pi_star).probs();
  const LatentMap labels = embedding_labels(spec);
  // The exact linear model: T_Z(s, label) = W phi(s, label).
  Matrix t_z(static_cast<Eigen::Index>(spec.n_states) * spec.n_actions, spec.n_states);
  for (int s = 0; s < spec.n_states; ++s) {
    for (int a = 0; a < spec.n_actions; ++a) {
      t_z.row(static_cast<Eigen::Index>(s) * spec.n_actions + a) = mdp.row(s, a);
    }
  }
  const PretrainingTerms t = pretraining_terms(mdp, d_star, d_off, labels, t_z, decoder);

  Theorem3Report r;
  r.term1 = t.transition_term();
  r.term2 = t.decoding_term();
  r.c3 = t.c3;
  r.c4 = spec.c4;
  r.chi2 = t.chi2;
  r.grad_l1 = population_mse_gradient(spec, d_star, pi_star, theta).cwiseAbs().sum();
  r.grad_term = r.c3 * r.c4 * r.grad_l1;
  r.lhs = policy_diff(mdp, decode_theta_policy(spec, theta, decoder, mode, &r.theta_residual), pi_star);
  r.rhs = r.term1 + r.term2 + r.grad_term;
  r.rhs_printed = r.term1 + r.term2 + r.c4 * r.grad_l1;
  r.holds = r.lhs <= std::min(r.rhs, r.rhs_printed) + 1e-9;
  return r;
}

nlohmann::json to_json(const Theorem3Report& r) {
  return {{"lhs", r.lhs},   {"term1", r.term1}, {"term2", r.term2},       {"grad_l1", r.grad_l1},
          {"grad_term", r.grad_term}, {"C3", r.c3}, {"C4", r.c4},     {"chi2", r.chi2},
          {"rhs", r.rhs},   {"rhs_printed", r.rhs_printed}, {"theta_residual", r.theta_residual}, {"holds", r.holds}};
}

// ---- random instances ----

Matrix random_stochastic_rows(Eigen::Index rows, int cols, Rng& rng, double min_prob) {
  if (min_prob * cols >= 1.0) throw ValidationError("random_stochastic_rows: min_prob too large");
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = ((1.0 - min_prob * cols) * rng.dirichlet(cols).array() + min_prob).matrix().transpose();
  }
  return out;
}

TabularMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
  Matrix transition(static_cast<Eigen::Index>(n_states) * n_actions, n_states);
  for (Eigen::Index r = 0; r < transition.rows(); ++r) transition.row(r) = rng.dirichlet(n_states).transpose();
  return TabularMdp(n_states, n_actions, std::move(transition), rng.dirichlet(n_states), gamma);
}

TabularPolicy random_policy(int n_states, int n_actions, Rng& rng, double min_prob) {
  return TabularPolicy(random_stochastic_rows(n_states, n_actions, rng, min_prob), 1e-9);
}

LatentMap random_latent_map(int n_states, int n_actions, int n_latent, Rng& rng) {
  if (n_latent <= 0) throw ValidationError("random_latent_map: n_latent must be positive");
  LatentMap phi;
  phi.n_latent = n_latent;
  phi.table.resize(n_states, n_actions);
  std::vector<int> order(static_cast<std::size_t>(n_actions));
  for (int s = 0; s < n_states; ++s) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (int i = 0; i < n_actions; ++i) {
      phi.table(s, order[static_cast<std::size_t>(i)]) = i < n_latent ? i : rng.uniform_int(n_latent);
    }
  }
  return phi;
}

Theorem1Instance random_theorem1_instance(Rng& rng, int max_states, int max_actions, int max_latent) {
  const int nS = 2 + rng.uniform_int(max_states - 1);
  const int nA = 2 + rng.uniform_int(max_actions - 1);
  const int nZ = 1 + rng.uniform_int(std::min(max_latent, nA));
  const double gamma = rng.bernoulli(0.5) ? 0.5 : 0.9;
  TabularMdp mdp = random_mdp(nS, nA, gamma, rng);
  TabularPolicy pi = random_policy(nS, nA, rng);
  DistVector d_off(((1.0 - 1e-3 * nS) * rng.dirichlet(nS).array() + 1e-3).matrix());
  LatentMap phi = random_latent_map(nS, nA, nZ, rng);
  Matrix t_z = random_stochastic_rows(static_cast<Eigen::Index>(nS) * nZ, nS, rng);
  TabularDecoder dec{nS, nZ, nA, random_stochastic_rows(static_cast<Eigen::Index>(nS) * nZ, nA, rng)};
  TabularLatent latent{random_stochastic_rows(nS, nZ, rng)};
  return {std::move(mdp), std::move(pi), std::move(d_off), std::move(phi), std::move(t_z), std::move(dec),
          std::move(latent)};
}

Theorem3Instance random_theorem3_instance(Rng& rng, int max_states, int max_actions, int max_d) {
  const int nS = 2 + rng.uniform_int(max_states - 1);
  const int nA = 2 + rng.uniform_int(max_actions - 1);
  const int d = 1 + rng.uniform_int(max_d);
  const double gamma = rng.bernoulli(0.5) ? 0.5 : 0.9;
  LinearInstance lin = build_linear_mdp(nS, nA, d, rng.engine()(), gamma);
  TabularPolicy pi = random_policy(nS, nA, rng);
  DistVector d_off(((1.0 - 1e-3 * nS) * rng.dirichlet(nS).array() + 1e-3).matrix());
  Matrix theta(d, nS);
  for (int s = 0; s < nS; ++s) theta.col(s) = lin.spec.embeddings_at(s) * rng.dirichlet(nA);
  const LatentMap labels = embedding_labels(lin.spec);
  TabularDecoder dec = optimal_decoder(offline_joint(d_off.probs(), nA), labels).decoder;
  return {std::move(lin), std::move(pi), std::move(d_off), std::move(theta), std::move(dec)};
}

}  // namespace trail
