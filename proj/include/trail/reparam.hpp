#pragma once

#include "trail/envs.hpp"
#include "trail/mdp.hpp"

namespace trail {

/// J_T = E_{s ~ d_off, a ~ Unif}[ KL(T(s,a) || T_Z(s, phi(s,a))) ].
/// `rows` is (|S|*|A|) x |S|; `t_z` is (|S|*|Z|) x |S|.
double transition_representation_error(const Matrix& rows, const Vector& d_off, const LatentMap& phi, const Matrix& t_z);

struct Reparametrization {
  LatentMap phi;
  Matrix t_z;  // (|S|*k) x |S|
  double j_t = 0.0;
};

/// Per state, k-medoids over the |A| transition rows under TV distance (farthest-point init, 50
/// refinement rounds); T_Z(s, z) is the mean of the member rows.
Reparametrization tabular_reparametrize(const Matrix& rows, int n_states, int n_actions, const DistVector& d_off, int k,
                                        std::uint64_t seed = 0);

inline Reparametrization tabular_reparametrize(const TabularMdp& mdp, const DistVector& d_off, int k,
                                               std::uint64_t seed = 0) {
  return tabular_reparametrize(mdp.transition(), mdp.n_states(), mdp.n_actions(), d_off, k, seed);
}

/// Factored model rows T_Z(s, phi(s, a)) expanded back to (|S|*|A|) x |S|.
Matrix factored_rows(const LatentMap& phi, const Matrix& t_z);

}  // namespace trail
