#include "trail/mdp.hpp"

#include <fstream>
#include <sstream>

namespace trail {

void check_stochastic_rows(const Matrix& rows, const std::string& what, double tol) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    check_distribution(rows.row(r).transpose(), what + " row " + std::to_string(r), tol);
  }
}

TabularMdp::TabularMdp(int n_states, int n_actions, Matrix transition, Vector initial, double gamma)
    : n_states_(n_states), n_actions_(n_actions), transition_(std::move(transition)), initial_(std::move(initial)),
      gamma_(gamma) {
  if (n_states <= 0 || n_actions <= 0) throw ValidationError("TabularMdp: state and action counts must be positive");
  require_dims(transition_.rows() == static_cast<Eigen::Index>(n_states) * n_actions && transition_.cols() == n_states,
               "TabularMdp: transition must be (|S|*|A|) x |S|");
  require_dims(initial_.size() == n_states, "TabularMdp: initial distribution must have |S| entries");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("TabularMdp: gamma must lie in [0, 1)");
  check_stochastic_rows(transition_, "TabularMdp transition");
  check_distribution(initial_, "TabularMdp initial");
}

TabularPolicy::TabularPolicy(Matrix probs, double tol) : probs_(std::move(probs)) {
  check_stochastic_rows(probs_, "TabularPolicy", tol);
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return TabularPolicy(Matrix::Constant(n_states, n_actions, 1.0 / n_actions));
}

TabularPolicy TabularPolicy::deterministic(const Eigen::VectorXi& actions, int n_actions) {
  Matrix probs = Matrix::Zero(actions.size(), n_actions);
  for (Eigen::Index s = 0; s < actions.size(); ++s) {
    if (actions(s) < 0 || actions(s) >= n_actions) throw ValidationError("TabularPolicy: action out of range");
    probs(s, actions(s)) = 1.0;
  }
  return TabularPolicy(std::move(probs));
}

Matrix policy_transition(const TabularMdp& mdp, const TabularPolicy& policy) {
  require_dims(policy.n_states() == mdp.n_states() && policy.n_actions() == mdp.n_actions(),
               "policy_transition: policy shape does not match MDP");
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();
  Matrix p = Matrix::Zero(ns, ns);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      const double w = policy(s, a);
      if (w != 0.0) p.row(s) += w * mdp.row(s, a);
    }
  }
  return p;
}

DistVector state_visitation(const TabularMdp& mdp, const TabularPolicy& policy) {
  const Matrix p = policy_transition(mdp, policy);
  const int ns = mdp.n_states();
  const Matrix system = Matrix::Identity(ns, ns) - mdp.gamma() * p.transpose();
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector d = (1.0 - mdp.gamma()) * lu.solve(mdp.initial());
  if (!d.allFinite()) throw Error("state_visitation: singular visitation system");
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) < -1e-10) throw Error("state_visitation: negative visitation mass " + std::to_string(d(i)));
    if (d(i) < 0.0) d(i) = 0.0;
  }
  const double total = d.sum();
  if (std::abs(total - 1.0) > 1e-10) throw Error("state_visitation: visitation mass drifted to " + std::to_string(total));
  return DistVector(d / total);
}

double policy_diff(const TabularMdp& mdp, const TabularPolicy& pi1, const TabularPolicy& pi2) {
  return tv_distance(state_visitation(mdp, pi1).probs(), state_visitation(mdp, pi2).probs());
}

double transition_err(const Vector& d, const TabularPolicy& pi1, const TabularPolicy& pi2, const Matrix& tbar) {
  const int ns = pi1.n_states();
  const int na = pi1.n_actions();
  require_dims(pi2.n_states() == ns && pi2.n_actions() == na, "transition_err: policy shapes differ");
  require_dims(d.size() == ns, "transition_err: d must have |S| entries");
  require_dims(tbar.rows() == static_cast<Eigen::Index>(ns) * na && tbar.cols() == ns,
               "transition_err: tbar must be (|S|*|A|) x |S|");
  Vector gap = Vector::Zero(ns);
  for (int s = 0; s < ns; ++s) {
    if (d(s) == 0.0) continue;
    for (int a = 0; a < na; ++a) {
      const double w = d(s) * (pi1(s, a) - pi2(s, a));
      if (w != 0.0) gap += w * tbar.row(static_cast<Eigen::Index>(s) * na + a).transpose();
    }
  }
  return 0.5 * gap.cwiseAbs().sum();
}

Matrix q_values(const TabularMdp& mdp, const Matrix& reward, double tol) {
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();
  require_dims(reward.rows() == ns && reward.cols() == na, "value_iteration: reward must be |S| x |A|");
  if (!(tol > 0.0)) throw ValidationError("value_iteration: tol must be positive");
  Vector v = Vector::Zero(ns);
  Matrix q(ns, na);
  for (;;) {
    const Vector next_value = mdp.transition() * v;
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) q(s, a) = reward(s, a) + mdp.gamma() * next_value(static_cast<Eigen::Index>(s) * na + a);
    }
    const Vector updated = q.rowwise().maxCoeff();
    const double residual = (updated - v).cwiseAbs().maxCoeff();
    v = updated;
    if (residual < tol) break;
  }
  return q;
}

TabularPolicy value_iteration(const TabularMdp& mdp, const Matrix& reward, double tol) {
  const Matrix q = q_values(mdp, reward, tol);
  Eigen::VectorXi greedy(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    int best = 0;
    for (int a = 1; a < q.cols(); ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    greedy(s) = best;
  }
  return TabularPolicy::deterministic(greedy, mdp.n_actions());
}

nlohmann::json to_json(const TabularMdp& mdp) {
  nlohmann::json doc;
  doc["n_states"] = mdp.n_states();
  doc["n_actions"] = mdp.n_actions();
  doc["gamma"] = mdp.gamma();
  doc["initial"] = std::vector<double>(mdp.initial().data(), mdp.initial().data() + mdp.initial().size());
  nlohmann::json transition = nlohmann::json::array();
  for (int s = 0; s < mdp.n_states(); ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    for (int a = 0; a < mdp.n_actions(); ++a) {
      std::vector<double> row(mdp.n_states());
      for (int sp = 0; sp < mdp.n_states(); ++sp) row[sp] = mdp.prob(s, a, sp);
      per_action.push_back(row);
    }
    transition.push_back(per_action);
  }
  doc["transition"] = std::move(transition);
  return doc;
}

TabularMdp mdp_from_json(const nlohmann::json& doc) {
  try {
    const int ns = doc.at("n_states").get<int>();
    const int na = doc.at("n_actions").get<int>();
    const double gamma = doc.at("gamma").get<double>();
    const auto initial = doc.at("initial").get<std::vector<double>>();
    const auto& transition = doc.at("transition");
    if (ns <= 0 || na <= 0) throw ValidationError("MDP JSON: n_states and n_actions must be positive");
    if (static_cast<int>(initial.size()) != ns) throw ValidationError("MDP JSON: initial has wrong length");
    if (static_cast<int>(transition.size()) != ns) throw ValidationError("MDP JSON: transition has wrong outer length");
    Matrix t(static_cast<Eigen::Index>(ns) * na, ns);
    for (int s = 0; s < ns; ++s) {
      if (static_cast<int>(transition[s].size()) != na) {
        throw ValidationError("MDP JSON: transition[" + std::to_string(s) + "] has wrong length");
      }
      for (int a = 0; a < na; ++a) {
        const auto row = transition[s][a].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != ns) {
          throw ValidationError("MDP JSON: transition[" + std::to_string(s) + "][" + std::to_string(a) + "] has wrong length");
        }
        for (int sp = 0; sp < ns; ++sp) t(static_cast<Eigen::Index>(s) * na + a, sp) = row[sp];
      }
    }
    return TabularMdp(ns, na, std::move(t), Eigen::Map<const Vector>(initial.data(), ns), gamma);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("MDP JSON: ") + e.what());
  }
}

void save_mdp(const std::string& path, const TabularMdp& mdp) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(mdp).dump(1) << '\n';
}

TabularMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return mdp_from_json(doc);
}

}  // namespace trail
