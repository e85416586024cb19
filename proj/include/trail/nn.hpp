#pragma once

#include "trail/core.hpp"
#include "trail/random.hpp"

#include <functional>
#include <string>
#include <vector>

namespace trail {

/// x * sigmoid(x)
inline double swish(double x) { return x / (1.0 + std::exp(-x)); }
inline double swish_grad(double x) {
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return sig * (1.0 + x * (1.0 - sig));
}

/// Fully connected network: swish on hidden layers, identity on the output.
/// Batches are passed column-wise (one sample per column).
class Mlp {
 public:
  /// Activations recorded by a forward pass for the matching backward pass.
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  struct Gradients {
    Vector params;  // same layout as parameters()
    Matrix input;   // d loss / d input, one column per sample
  };

  Mlp() = default;
  /// Weights ~ N(0, 1/fan_in), biases zero.
  Mlp(std::vector<int> sizes, Rng& rng);

  /// `input -> hidden... -> output`
  static Mlp make(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int n_layers() const { return static_cast<int>(weights_.size()); }
  Eigen::Index parameter_count() const;

  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

  /// Flattened as, per layer, W in row-major order followed by b.
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Tape& tape) const;

  /// Reverse pass for the upstream gradient d loss / d output; parameter gradients are summed over columns.
  Gradients backward(const Tape& tape, const Matrix& upstream) const;

 private:
  std::vector<int> sizes_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

struct ForwardBackward {
  Matrix output;
  Vector param_grads;
  Matrix input_grads;
};

ForwardBackward forward_backward(const Mlp& net, const Matrix& x, const Matrix& upstream);

/// Bias-corrected adaptive-moment optimizer state.
struct OptState {
  Vector m;
  Vector v;
  long step = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptState for_params(Eigen::Index n, double lr);
};

/// Applies one update to `params` in place.
void opt_step(OptState& state, Vector& params, const Vector& grads);

struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::Index coords_checked = 0;
  bool passed = true;
};

/// Central differences against `analytic`; relative error |analytic - numeric| / max(|numeric|, 1e-8).
/// Above `max_coords` parameters a seeded random subset of that size is checked.
GradCheckReport gradient_check(const std::function<double(const Vector&)>& loss, const Vector& params,
                               const Vector& analytic, double h, double tolerance, std::uint64_t seed = 0,
                               Eigen::Index max_coords = 10000);

// Checkpoint layout (all integers little- or big-endian as tagged):
//   8 bytes  magic "TRAILMLP"
//   4 bytes  endianness tag 0x01020304 written in native order
//   4 bytes  uint32 number of layer sizes L
//   4*L      int32 layer sizes
//   then per layer: W (rows x cols, row-major float64) followed by b (float64)
void save_checkpoint(const std::string& path, const Mlp& net);
Mlp load_checkpoint(const std::string& path);

}  // namespace trail
