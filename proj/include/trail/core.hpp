#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace trail {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexMatrix = Eigen::MatrixXi;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of two operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented invariant (probability rows, ranges, config fields).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// p(i) > 0 where q(i) = 0 inside a KL or chi-squared divergence.
class SupportError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

/// Validates a probability vector; `tol` bounds |sum - 1|.
template <typename Derived>
void check_distribution(const Eigen::MatrixBase<Derived>& p, const std::string& what, double tol = 1e-12) {
  if (p.size() == 0) throw ValidationError(what + ": empty distribution");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p(i)) || p(i) < 0.0) {
      throw ValidationError(what + ": entry " + std::to_string(i) + " is negative or non-finite");
    }
  }
  const double total = p.sum();
  if (std::abs(total - 1.0) > tol) {
    throw ValidationError(what + ": sums to " + std::to_string(total) + ", expected 1");
  }
}

/// Probability vector over a finite set.
class DistVector {
 public:
  DistVector() = default;
  explicit DistVector(Vector p, double tol = 1e-12) : p_(std::move(p)) { check_distribution(p_, "DistVector", tol); }

  static DistVector uniform(Eigen::Index n) { return DistVector(Vector::Constant(n, 1.0 / static_cast<double>(n))); }
  static DistVector point_mass(Eigen::Index n, Eigen::Index at) {
    Vector p = Vector::Zero(n);
    p(at) = 1.0;
    return DistVector(std::move(p));
  }

  const Vector& probs() const { return p_; }
  Eigen::Index size() const { return p_.size(); }
  double operator()(Eigen::Index i) const { return p_(i); }
  operator const Vector&() const { return p_; }

 private:
  Vector p_;
};

}  // namespace trail
