#include "trail/rff.hpp"

#include <numbers>

namespace trail {

RffMap RffMap::sample(Eigen::Index input_dim, Eigen::Index feature_dim, std::uint64_t seed) {
  if (input_dim <= 0 || feature_dim <= 0) throw ValidationError("RffMap: dimensions must be positive");
  RffMap map;
  map.seed = seed;
  Rng rng(derive_seed(seed, 0x726666));
  map.W.resize(feature_dim, input_dim);
  for (Eigen::Index i = 0; i < map.W.size(); ++i) map.W.data()[i] = rng.normal();
  map.b.resize(feature_dim);
  for (Eigen::Index i = 0; i < feature_dim; ++i) map.b(i) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return map;
}

Matrix rff_backward(const Matrix& x, const RffMap& map, const Matrix& upstream) {
  Matrix arg = map.W * x;
  arg.colwise() += map.b;
  const Matrix local = (-map.scale()) * arg.array().sin().matrix();
  return map.W.transpose() * upstream.cwiseProduct(local);
}

Vector linear_candidate_probs(const Vector& phi_bar, const Matrix& psi_bar_candidates) {
  Vector scores = (psi_bar_candidates.transpose() * phi_bar).cwiseMax(0.0);
  const double total = scores.sum();
  if (total <= 0.0) return Vector::Constant(scores.size(), 1.0 / static_cast<double>(scores.size()));
  return scores / total;
}

Vector energy_candidate_probs(const Vector& phi, const Matrix& psi_candidates) {
  Vector logits = -0.5 * (psi_candidates.colwise() - phi).colwise().squaredNorm().transpose();
  logits.array() -= logits.maxCoeff();
  Vector w = logits.array().exp();
  return w / w.sum();
}

}  // namespace trail
