#pragma once

#include "trail/core.hpp"

#include <json.hpp>

#include <string>

namespace trail {

/// Finite discounted MDP without rewards.
///
/// Transition probabilities are stored as a (|S|*|A|) x |S| matrix whose row
/// `s * |A| + a` is the next-state distribution T(.|s,a).
class TabularMdp {
 public:
  TabularMdp() = default;
  TabularMdp(int n_states, int n_actions, Matrix transition, Vector initial, double gamma);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  const Vector& initial() const { return initial_; }
  const Matrix& transition() const { return transition_; }

  auto row(int s, int a) const { return transition_.row(static_cast<Eigen::Index>(s) * n_actions_ + a); }
  double prob(int s, int a, int sp) const { return transition_(static_cast<Eigen::Index>(s) * n_actions_ + a, sp); }

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  Matrix transition_;
  Vector initial_;
  double gamma_ = 0.0;
};

/// Stochastic policy stored as an |S| x |A| row-stochastic matrix.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  explicit TabularPolicy(Matrix probs, double tol = 1e-12);

  static TabularPolicy uniform(int n_states, int n_actions);
  static TabularPolicy deterministic(const Eigen::VectorXi& actions, int n_actions);

  int n_states() const { return static_cast<int>(probs_.rows()); }
  int n_actions() const { return static_cast<int>(probs_.cols()); }
  const Matrix& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }

 private:
  Matrix probs_;
};

/// Checks that every row of `rows` is a probability vector.
void check_stochastic_rows(const Matrix& rows, const std::string& what, double tol = 1e-12);

/// Row-stochastic state-to-state matrix P[s][s'] = sum_a pi(a|s) T(s'|s,a).
Matrix policy_transition(const TabularMdp& mdp, const TabularPolicy& policy);

/// Discounted visitation d = (1-gamma)(I - gamma P^T)^{-1} mu by dense LU solve.
DistVector state_visitation(const TabularMdp& mdp, const TabularPolicy& policy);

enum class DivergenceKind { TV, KL, CHI2 };

/// TV = 1/2 sum |p-q|, KL = sum p ln(p/q) with 0 ln 0 = 0, CHI2 = sum (p-q)^2 / q.
/// KL and CHI2 throw SupportError when p(i) > 0 = q(i).
template <typename DerivedP, typename DerivedQ>
double divergence(DivergenceKind kind, const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  require_dims(p.size() == q.size(), "divergence: cardinality mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    const double qi = q(i);
    switch (kind) {
      case DivergenceKind::TV:
        total += std::abs(pi - qi);
        break;
      case DivergenceKind::KL:
        if (pi <= 0.0) break;
        if (qi <= 0.0) throw SupportError("KL divergence: p > 0 where q = 0 at index " + std::to_string(i));
        total += pi * std::log(pi / qi);
        break;
      case DivergenceKind::CHI2:
        if (qi <= 0.0) {
          if (pi > 0.0) throw SupportError("chi-squared divergence: p > 0 where q = 0 at index " + std::to_string(i));
          break;
        }
        total += (pi - qi) * (pi - qi) / qi;
        break;
    }
  }
  if (kind == DivergenceKind::TV) return 0.5 * total;
  // KL of two distributions is nonnegative; clip roundoff.
  return std::max(total, 0.0);
}

template <typename DerivedP, typename DerivedQ>
double tv_distance(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  return divergence(DivergenceKind::TV, p, q);
}

template <typename DerivedP, typename DerivedQ>
double kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  return divergence(DivergenceKind::KL, p, q);
}

template <typename DerivedP, typename DerivedQ>
double chi2_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  return divergence(DivergenceKind::CHI2, p, q);
}

/// Diff(pi1, pi2) = TV(d^pi1, d^pi2).
double policy_diff(const TabularMdp& mdp, const TabularPolicy& pi1, const TabularPolicy& pi2);

/// Err_d(pi1, pi2, tbar) = 1/2 sum_s' | E_{s~d} sum_a tbar(s'|s,a)(pi1(a|s) - pi2(a|s)) |.
double transition_err(const Vector& d, const TabularPolicy& pi1, const TabularPolicy& pi2, const Matrix& tbar);

/// Optimal discounted action values for a reward table (|S| x |A|).
Matrix q_values(const TabularMdp& mdp, const Matrix& reward, double tol);

/// Greedy deterministic policy from value iteration; argmax ties go to the lowest action index.
TabularPolicy value_iteration(const TabularMdp& mdp, const Matrix& reward, double tol);

nlohmann::json to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& doc);
void save_mdp(const std::string& path, const TabularMdp& mdp);
TabularMdp load_mdp(const std::string& path);

}  // namespace trail
