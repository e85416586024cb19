#include "trail/reparam.hpp"

#include "trail/random.hpp"

#include <limits>
#include <vector>

namespace trail {

double transition_representation_error(const Matrix& rows, const Vector& d_off, const LatentMap& phi, const Matrix& t_z) {
  const int ns = phi.n_states();
  const int na = phi.n_actions();
  require_dims(rows.rows() == static_cast<Eigen::Index>(ns) * na && rows.cols() == ns,
               "transition_representation_error: rows must be (|S|*|A|) x |S|");
  require_dims(t_z.rows() == static_cast<Eigen::Index>(ns) * phi.n_latent && t_z.cols() == ns,
               "transition_representation_error: T_Z must be (|S|*|Z|) x |S|");
  require_dims(d_off.size() == ns, "transition_representation_error: d_off must be over |S|");
  double total = 0.0;
  for (int s = 0; s < ns; ++s) {
    if (d_off(s) == 0.0) continue;
    double per_state = 0.0;
    for (int a = 0; a < na; ++a) {
      const auto t = rows.row(static_cast<Eigen::Index>(s) * na + a);
      const auto tz = t_z.row(static_cast<Eigen::Index>(s) * phi.n_latent + phi(s, a));
      per_state += kl_divergence(t, tz);
    }
    total += d_off(s) * per_state / na;
  }
  return total;
}

Matrix factored_rows(const LatentMap& phi, const Matrix& t_z) {
  const int ns = phi.n_states();
  const int na = phi.n_actions();
  Matrix out(static_cast<Eigen::Index>(ns) * na, t_z.cols());
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      out.row(static_cast<Eigen::Index>(s) * na + a) = t_z.row(static_cast<Eigen::Index>(s) * phi.n_latent + phi(s, a));
    }
  }
  return out;
}

namespace {

constexpr int kRefinementRounds = 50;

// Picks an index among ties of the extreme value; `better(a, b)` is strict.
template <typename Better>
int pick(const Vector& score, const std::vector<bool>& allowed, Better better, Rng& rng) {
  int best = -1;
  for (int i = 0; i < score.size(); ++i) {
    if (!allowed[i]) continue;
    if (best < 0 || better(score(i), score(best))) best = i;
  }
  std::vector<int> ties;
  for (int i = 0; i < score.size(); ++i) {
    if (allowed[i] && !better(score(best), score(i)) && !better(score(i), score(best))) ties.push_back(i);
  }
  return ties[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(ties.size())))];
}

struct Clustering {
  std::vector<int> assignment;  // action -> cluster
  std::vector<int> medoids;     // cluster -> action
};

Clustering k_medoids(const Matrix& dist, int k, Rng& rng) {
  const int n = static_cast<int>(dist.rows());
  std::vector<bool> free(static_cast<std::size_t>(n), true);
  Clustering c;
  // Farthest-point initialization, seeded at the row with the largest total distance.
  c.medoids.push_back(pick(dist.rowwise().sum(), free, std::greater<double>(), rng));
  free[static_cast<std::size_t>(c.medoids.back())] = false;
  Vector nearest = dist.col(c.medoids.back());
  while (static_cast<int>(c.medoids.size()) < k) {
    c.medoids.push_back(pick(nearest, free, std::greater<double>(), rng));
    free[static_cast<std::size_t>(c.medoids.back())] = false;
    nearest = nearest.cwiseMin(dist.col(c.medoids.back()));
  }

  c.assignment.assign(static_cast<std::size_t>(n), 0);
  auto assign = [&] {
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int j = 1; j < k; ++j) {
        if (dist(i, c.medoids[j]) < dist(i, c.medoids[best])) best = j;
      }
      // A medoid always belongs to its own cluster.
      for (int j = 0; j < k; ++j) {
        if (c.medoids[j] == i) best = j;
      }
      c.assignment[static_cast<std::size_t>(i)] = best;
    }
  };
  assign();
  for (int round = 0; round < kRefinementRounds; ++round) {
    bool changed = false;
    for (int j = 0; j < k; ++j) {
      auto cost_of = [&](int cand) {
        double cost = 0.0;
        for (int i = 0; i < n; ++i) {
          if (c.assignment[static_cast<std::size_t>(i)] == j) cost += dist(cand, i);
        }
        return cost;
      };
      int best = c.medoids[j];
      double best_cost = cost_of(best);
      for (int cand = 0; cand < n; ++cand) {
        if (c.assignment[static_cast<std::size_t>(cand)] != j) continue;
        const double cost = cost_of(cand);
        if (cost < best_cost - 1e-15) {
          best = cand;
          best_cost = cost;
        }
      }
      if (best != c.medoids[j]) {
        c.medoids[j] = best;
        changed = true;
      }
    }
    const auto before = c.assignment;
    assign();
    if (!changed && before == c.assignment) break;
  }
  return c;
}

}  // namespace

Reparametrization tabular_reparametrize(const Matrix& rows, int n_states, int n_actions, const DistVector& d_off, int k,
                                        std::uint64_t seed) {
  if (k < 1 || k > n_actions) throw ValidationError("tabular_reparametrize: need 1 <= k <= |A|");
  require_dims(rows.rows() == static_cast<Eigen::Index>(n_states) * n_actions && rows.cols() == n_states,
               "tabular_reparametrize: rows must be (|S|*|A|) x |S|");
  require_dims(d_off.size() == n_states, "tabular_reparametrize: d_off must be over |S|");
  Reparametrization out;
  out.phi.n_latent = k;
  out.phi.table.resize(n_states, n_actions);
  out.t_z = Matrix::Zero(static_cast<Eigen::Index>(n_states) * k, n_states);
  for (int s = 0; s < n_states; ++s) {
    const auto block = rows.middleRows(static_cast<Eigen::Index>(s) * n_actions, n_actions);
    Matrix dist(n_actions, n_actions);
    for (int i = 0; i < n_actions; ++i) {
      for (int j = 0; j < n_actions; ++j) dist(i, j) = tv_distance(block.row(i), block.row(j));
    }
    Rng rng(derive_seed(seed, 0x6b6d65, static_cast<std::uint64_t>(s)));
    const Clustering c = k_medoids(dist, k, rng);
    // Mean row accumulated as medoid + mean offset, so clusters of identical rows reproduce them bitwise.
    Vector members = Vector::Zero(k);
    Matrix offsets = Matrix::Zero(k, n_states);
    for (int a = 0; a < n_actions; ++a) {
      const int z = c.assignment[static_cast<std::size_t>(a)];
      out.phi.table(s, a) = z;
      offsets.row(z) += block.row(a) - block.row(c.medoids[static_cast<std::size_t>(z)]);
      members(z) += 1.0;
    }
    for (int z = 0; z < k; ++z) {
      out.t_z.row(static_cast<Eigen::Index>(s) * k + z) =
          block.row(c.medoids[static_cast<std::size_t>(z)]) + offsets.row(z) / members(z);
    }
  }
  out.j_t = transition_representation_error(rows, d_off.probs(), out.phi, out.t_z);
  return out;
}

}  // namespace trail
