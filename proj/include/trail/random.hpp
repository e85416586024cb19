#pragma once

#include "trail/core.hpp"

#include <cstdint>
#include <random>
#include <span>

namespace trail {

/// SplitMix64 finalizer; used to derive independent stream seeds from (seed, stream, counter).
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

/// Deterministic random stream. All sampling in the library goes through this type.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  /// Inverse-CDF draw from unnormalized nonnegative weights.
  template <typename Derived>
  int categorical(const Eigen::MatrixBase<Derived>& weights) {
    const double total = weights.sum();
    double u = uniform() * total;
    const int n = static_cast<int>(weights.size());
    for (int i = 0; i < n; ++i) {
      u -= weights(i);
      if (u < 0.0) return i;
    }
    for (int i = n - 1; i >= 0; --i) {
      if (weights(i) > 0.0) return i;
    }
    return n - 1;
  }

  Vector dirichlet(Eigen::Index k, double alpha = 1.0) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    Vector x(k);
    for (Eigen::Index i = 0; i < k; ++i) x(i) = gamma(engine_);
    const double total = x.sum();
    if (total <= 0.0) return Vector::Constant(k, 1.0 / static_cast<double>(k));
    return x / total;
  }

  Vector normal_vector(Eigen::Index k) {
    Vector x(k);
    for (Eigen::Index i = 0; i < k; ++i) x(i) = normal();
    return x;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace trail
