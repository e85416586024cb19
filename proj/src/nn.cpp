#include "trail/nn.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace trail {

Mlp::Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ValidationError("Mlp: need at least input and output sizes");
  for (int s : sizes_) {
    if (s <= 0) throw ValidationError("Mlp: layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    Matrix w(sizes_[l + 1], sizes_[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.normal();
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(sizes_[l + 1]));
  }
}

Mlp Mlp::make(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng) {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  return Mlp(std::move(sizes), rng);
}

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index n = 0;
  for (int l = 0; l < n_layers(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

Vector Mlp::parameters() const {
  Vector flat(parameter_count());
  Eigen::Index at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    const auto& w = weights_[l];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data() + at, w.rows(),
                                                                                       w.cols()) = w;
    at += w.size();
    flat.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return flat;
}

void Mlp::set_parameters(const Vector& flat) {
  require_dims(flat.size() == parameter_count(), "Mlp::set_parameters: wrong parameter count");
  Eigen::Index at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    auto& w = weights_[l];
    w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data() + at,
                                                                                             w.rows(), w.cols());
    at += w.size();
    biases_[l] = flat.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  Tape tape;
  return forward(x, tape);
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
  require_dims(x.rows() == input_dim(), "Mlp::forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                                            std::to_string(input_dim()));
  if (!x.allFinite()) throw NonFiniteError("Mlp::forward: non-finite input");
  tape.inputs.clear();
  tape.pre.clear();
  Matrix h = x;
  for (int l = 0; l < n_layers(); ++l) {
    tape.inputs.push_back(h);
    Matrix z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (!z.allFinite()) throw NonFiniteError("Mlp::forward: non-finite activation at layer " + std::to_string(l));
    tape.pre.push_back(z);
    h = (l + 1 < n_layers()) ? Matrix(z.unaryExpr([](double v) { return swish(v); })) : z;
  }
  return h;
}

Mlp::Gradients Mlp::backward(const Tape& tape, const Matrix& upstream) const {
  require_dims(static_cast<int>(tape.pre.size()) == n_layers(), "Mlp::backward: tape does not match network");
  require_dims(upstream.rows() == output_dim() && upstream.cols() == tape.pre.back().cols(),
               "Mlp::backward: upstream gradient has wrong shape");
  Gradients grads;
  grads.params.resize(parameter_count());
  std::vector<Eigen::Index> offsets(n_layers());
  Eigen::Index at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    offsets[l] = at;
    at += weights_[l].size() + biases_[l].size();
  }
  Matrix delta = upstream;
  for (int l = n_layers() - 1; l >= 0; --l) {
    if (l + 1 < n_layers()) delta = delta.cwiseProduct(tape.pre[l].unaryExpr([](double v) { return swish_grad(v); }));
    const Matrix dw = delta * tape.inputs[l].transpose();
    const auto& w = weights_[l];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(grads.params.data() + offsets[l],
                                                                                       w.rows(), w.cols()) = dw;
    grads.params.segment(offsets[l] + w.size(), biases_[l].size()) = delta.rowwise().sum();
    delta = w.transpose() * delta;
  }
  grads.input = std::move(delta);
  return grads;
}

ForwardBackward forward_backward(const Mlp& net, const Matrix& x, const Matrix& upstream) {
  Mlp::Tape tape;
  ForwardBackward out;
  out.output = net.forward(x, tape);
  auto grads = net.backward(tape, upstream);
  out.param_grads = std::move(grads.params);
  out.input_grads = std::move(grads.input);
  return out;
}

OptState OptState::for_params(Eigen::Index n, double lr) {
  OptState state;
  state.m = Vector::Zero(n);
  state.v = Vector::Zero(n);
  state.lr = lr;
  return state;
}

void opt_step(OptState& state, Vector& params, const Vector& grads) {
  require_dims(params.size() == grads.size() && state.m.size() == params.size() && state.v.size() == params.size(),
               "opt_step: shape mismatch");
  if (!grads.allFinite()) throw NonFiniteError("opt_step: non-finite gradient");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

GradCheckReport gradient_check(const std::function<double(const Vector&)>& loss, const Vector& params,
                               const Vector& analytic, double h, double tolerance, std::uint64_t seed,
                               Eigen::Index max_coords) {
  if (!(h > 0.0)) throw ValidationError("gradient_check: h must be positive");
  require_dims(analytic.size() == params.size(), "gradient_check: analytic gradient has wrong size");
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(params.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (params.size() > max_coords) {
    Rng rng(derive_seed(seed, 0x677263));
    std::shuffle(coords.begin(), coords.end(), rng.engine());
    coords.resize(static_cast<std::size_t>(max_coords));
    std::sort(coords.begin(), coords.end());
  }
  GradCheckReport report;
  Vector probe = params;
  for (Eigen::Index i : coords) {
    const double original = probe(i);
    probe(i) = original + h;
    const double up = loss(probe);
    probe(i) = original - h;
    const double down = loss(probe);
    probe(i) = original;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic(i) - numeric) / std::max(std::abs(numeric), 1e-8);
    if (!(rel <= report.max_rel_error)) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
    ++report.coords_checked;
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'I', 'L', 'M', 'L', 'P'};
constexpr std::uint32_t kEndianTag = 0x01020304u;

template <typename T>
T byteswap_value(T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, bool swap, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError(path + ": truncated checkpoint");
  return swap ? byteswap_value(value) : value;
}

}  // namespace

void save_checkpoint(const std::string& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kEndianTag);
  write_pod(out, static_cast<std::uint32_t>(net.sizes().size()));
  for (int s : net.sizes()) write_pod(out, static_cast<std::int32_t>(s));
  const Vector flat = net.parameters();
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw Error("write failed on " + path);
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ValidationError(path + ": not a network checkpoint");
  std::uint32_t tag = read_pod<std::uint32_t>(in, false, path);
  bool swap = false;
  if (tag != kEndianTag) {
    if (byteswap_value(tag) != kEndianTag) throw ValidationError(path + ": bad endianness tag");
    swap = true;
  }
  const auto n_sizes = read_pod<std::uint32_t>(in, swap, path);
  if (n_sizes < 2 || n_sizes > 1024) throw ValidationError(path + ": implausible layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < n_sizes; ++i) sizes.push_back(read_pod<std::int32_t>(in, swap, path));
  Rng unused(0);
  Mlp net(sizes, unused);
  Vector flat(net.parameter_count());
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = read_pod<double>(in, swap, path);
  net.set_parameters(flat);
  return net;
}

}  // namespace trail
