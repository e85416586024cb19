#include "helpers.hpp"
#include "trail/nn.hpp"

#include <doctest.h>

#include <fstream>

using namespace trail;

TEST_CASE("linear net forward and backward") {
  Rng rng(1);
  Mlp id({3, 3}, rng);
  id.weights()[0] = Matrix::Identity(3, 3);
  id.biases()[0].setZero();
  const Matrix x = Matrix::Random(3, 5);
  CHECK(id.forward(x) == x);

  Mlp scalar({2, 1}, rng);
  Matrix xs(2, 1);
  xs << 0.3, -1.7;
  auto fb = forward_backward(scalar, xs, Matrix::Ones(1, 1));
  // Layout: W row-major, then b.
  CHECK(fb.param_grads(0) == doctest::Approx(0.3));
  CHECK(fb.param_grads(1) == doctest::Approx(-1.7));
  CHECK(fb.param_grads(2) == doctest::Approx(1.0));
  CHECK(fb.input_grads(0, 0) == doctest::Approx(scalar.weights()[0](0, 0)));
}

TEST_CASE("swish derivative against a central difference") {
  for (double x : {-3.0, -0.5, 0.0, 0.7, 4.0}) {
    const double h = 1e-6;
    CHECK(swish_grad(x) == doctest::Approx((swish(x + h) - swish(x - h)) / (2 * h)).epsilon(1e-8));
  }
}

TEST_CASE("two hidden layers pass a finite-difference check") {
  Rng rng(2);
  auto net = Mlp::make(4, {16, 16}, 3, rng);
  const Matrix x = Matrix::Random(4, 7);
  const Matrix target = Matrix::Random(3, 7);
  auto loss = [&](const Vector& p) {
    Mlp copy = net;
    copy.set_parameters(p);
    return 0.5 * (copy.forward(x) - target).squaredNorm();
  };
  Mlp::Tape tape;
  const Matrix out = net.forward(x, tape);
  const auto grads = net.backward(tape, out - target);
  auto report = gradient_check(loss, net.parameters(), grads.params, 1e-5, 1e-4);
  CHECK(report.passed);
  CHECK(report.max_rel_error <= 1e-4);

  // Input gradient checked directly.
  const double h = 1e-6;
  Matrix xp = x, xm = x;
  xp(2, 3) += h;
  xm(2, 3) -= h;
  const double num = (0.5 * (net.forward(xp) - target).squaredNorm() - 0.5 * (net.forward(xm) - target).squaredNorm()) / (2 * h);
  CHECK(grads.input(2, 3) == doctest::Approx(num).epsilon(1e-6));
}

TEST_CASE("non-finite input is rejected") {
  Rng rng(3);
  auto net = Mlp::make(2, {4}, 1, rng);
  Matrix x(2, 1);
  x << 1.0, NAN;
  CHECK_THROWS_AS(net.forward(x), NonFiniteError);
}

TEST_CASE("optimizer") {
  SUBCASE("zero gradient leaves parameters alone") {
    auto st = OptState::for_params(3, 1e-2);
    Vector p(3);
    p << 1, 2, 3;
    const Vector before = p;
    opt_step(st, p, Vector::Zero(3));
    CHECK(p == before);
  }
  SUBCASE("first step has magnitude lr") {
    auto st = OptState::for_params(2, 1e-3);
    Vector p = Vector::Zero(2);
    Vector g(2);
    g << 0.5, -4.0;
    opt_step(st, p, g);
    // m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
    CHECK(p(0) == doctest::Approx(-1e-3 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(1e-3 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("constant gradient moves against its sign") {
    auto st = OptState::for_params(1, 1e-2);
    Vector p = Vector::Zero(1);
    for (int i = 0; i < 100; ++i) opt_step(st, p, Vector::Constant(1, 2.0));
    CHECK(p(0) < -0.5);
  }
  SUBCASE("non-finite gradient") {
    auto st = OptState::for_params(1, 1e-2);
    Vector p = Vector::Zero(1);
    CHECK_THROWS_AS(opt_step(st, p, Vector::Constant(1, INFINITY)), NonFiniteError);
  }
}

TEST_CASE("gradient check reports") {
  Vector p(4);
  p << 0.1, -2.0, 3.0, 0.5;
  auto quad = [](const Vector& q) { return 0.5 * q.squaredNorm(); };
  auto ok = gradient_check(quad, p, p, 1e-5, 1e-4);
  CHECK(ok.max_rel_error <= 1e-9);
  auto bad = gradient_check(quad, p, 2.0 * p, 1e-5, 1e-4);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error == doctest::Approx(1.0).epsilon(1e-6));
  auto sub = gradient_check(quad, Vector::Ones(50), Vector::Ones(50), 1e-5, 1e-4, 3, 10);
  CHECK(sub.coords_checked == 10);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testing::scratch_dir("nn");
  Rng rng(4);
  auto net = Mlp::make(3, {5, 6}, 2, rng);
  const auto path = (dir / "net.bin").string();
  save_checkpoint(path, net);
  auto back = load_checkpoint(path);
  CHECK(back.sizes() == net.sizes());
  CHECK(back.parameters() == net.parameters());

  const auto junk = (dir / "junk.bin").string();
  std::ofstream(junk) << "definitely not a network";
  CHECK_THROWS_AS(load_checkpoint(junk), ValidationError);
}
