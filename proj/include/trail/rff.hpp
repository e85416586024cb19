#pragma once

#include "trail/core.hpp"
#include "trail/random.hpp"

namespace trail {

/// Frozen random Fourier feature layer x -> sqrt(2/D) cos(W x + b), W ~ N(0, 1), b ~ Unif[0, 2 pi).
/// <rff(x), rff(y)> approximates exp(-|x - y|^2 / 2).
struct RffMap {
  Matrix W;  // D x d
  Vector b;  // D
  std::uint64_t seed = 0;

  Eigen::Index input_dim() const { return W.cols(); }
  Eigen::Index feature_dim() const { return W.rows(); }
  double scale() const { return std::sqrt(2.0 / static_cast<double>(W.rows())); }

  static RffMap sample(Eigen::Index input_dim, Eigen::Index feature_dim, std::uint64_t seed);
};

/// Features of each column of `x`.
template <typename Derived>
Matrix rff_features(const Eigen::MatrixBase<Derived>& x, const RffMap& map) {
  require_dims(x.rows() == map.input_dim(), "rff_features: input dimension mismatch");
  const Matrix xe = x;  // evaluate once; nullary expressions would be resampled
  if (!xe.allFinite()) throw NonFiniteError("rff_features: non-finite input");
  Matrix arg = map.W * xe;
  arg.colwise() += map.b;
  return map.scale() * arg.array().cos().matrix();
}

/// Backpropagates d loss / d features to d loss / d input for the batch `x`.
Matrix rff_backward(const Matrix& x, const RffMap& map, const Matrix& upstream);

/// Candidate distribution proportional to max(<phi_bar, psi_bar_j>, 0), the linear-model analog of
/// the energy softmax. Falls back to uniform when every score is nonpositive.
Vector linear_candidate_probs(const Vector& phi_bar, const Matrix& psi_bar_candidates);

/// Softmax over candidates of -|phi - psi_j|^2 / 2.
Vector energy_candidate_probs(const Vector& phi, const Matrix& psi_candidates);

}  // namespace trail
