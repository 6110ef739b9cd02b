// Finite-difference checks for every layer's backward pass; everything
// downstream (GAN training, inversion, classifiers) stands on these.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "nlohmann/json.hpp"

#include "dpgomi/nn.hpp"
#include "dpgomi/rng.hpp"

using namespace dpgomi;

namespace {

// Scalar loss L = sum of elementwise squares of the net output; its exact
// output gradient is 2 * y.
double loss_of(const Net& net, const Matrix& x) {
  return net.forward(x).squaredNorm();
}

// Central finite differences of L with respect to the parameters.
Vector fd_param_grad(Net& net, const Matrix& x, double h = 1e-6) {
  Vector params = net.get_params();
  Vector grad(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    Vector p = params;
    p[i] += h;
    net.set_params(p);
    double up = loss_of(net, x);
    p[i] -= 2 * h;
    net.set_params(p);
    double down = loss_of(net, x);
    grad[i] = (up - down) / (2 * h);
  }
  net.set_params(params);
  return grad;
}

Vector analytic_param_grad(const Net& net, const Matrix& x) {
  std::vector<Matrix> cache;
  Matrix y = net.forward_cached(x, cache);
  Vector grad = Vector::Zero(net.param_count());
  net.backward(cache, 2.0 * y,
               std::span<double>(grad.data(),
                                 static_cast<std::size_t>(grad.size())));
  return grad;
}

Matrix analytic_input_grad(const Net& net, const Matrix& x) {
  std::vector<Matrix> cache;
  Matrix y = net.forward_cached(x, cache);
  Vector scratch = Vector::Zero(net.param_count());
  return net.backward(cache, 2.0 * y,
                      std::span<double>(scratch.data(),
                                        static_cast<std::size_t>(
                                            scratch.size())));
}

}  // namespace

TEST_CASE("dense + activation parameter gradients match finite differences") {
  Rng rng(1, "nn-test");
  for (Act act : {Act::identity, Act::tanh, Act::sigmoid, Act::leaky_relu}) {
    Net net = make_mlp(3, {5, 4}, 2, act, Act::tanh);
    net.init_params(rng);
    Matrix x(3, 6);
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 3; ++i) x(i, j) = rng.gaussian();

    Vector analytic = analytic_param_grad(net, x);
    Vector fd = fd_param_grad(net, x);
    REQUIRE(analytic.size() == fd.size());
    double rel = (analytic - fd).norm() / (fd.norm() + 1e-12);
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("input gradients match finite differences") {
  Rng rng(2, "nn-test");
  Net net = make_mlp(4, {8}, 3, Act::tanh, Act::identity);
  net.init_params(rng);
  Matrix x(4, 1);
  for (int i = 0; i < 4; ++i) x(i, 0) = rng.gaussian();

  Matrix analytic = analytic_input_grad(net, x);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    Matrix xp = x, xm = x;
    xp(i, 0) += h;
    xm(i, 0) -= h;
    double fd = (loss_of(net, xp) - loss_of(net, xm)) / (2 * h);
    CHECK(analytic(i, 0) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("relu backward uses the preactivation sign") {
  Net net;
  net.add(std::make_unique<ActivationLayer>(Act::relu));
  Matrix x(2, 1);
  x << -1.0, 2.0;
  std::vector<Matrix> cache;
  Matrix y = net.forward_cached(x, cache);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(1, 0) == 2.0);
  Matrix dy = Matrix::Ones(2, 1);
  Matrix dx = net.backward(cache, dy, {});
  CHECK(dx(0, 0) == 0.0);
  CHECK(dx(1, 0) == 1.0);
}

TEST_CASE("parameter round-trip and checksum stability") {
  Rng rng(3, "nn-test");
  Net net = make_mlp(2, {4}, 2, Act::relu, Act::identity);
  net.init_params(rng);
  Vector p = net.get_params();
  std::string sum = net.checksum();
  net.set_params(p);
  CHECK(net.checksum() == sum);

  Vector q = p;
  q[0] += 1e-9;
  net.set_params(q);
  CHECK(net.checksum() != sum);
}

TEST_CASE("description round-trip rebuilds an identical net") {
  Rng rng(4, "nn-test");
  Net net = make_mlp(3, {6, 5}, 1, Act::leaky_relu, Act::sigmoid);
  net.init_params(rng);
  Net rebuilt = Net::from_description(net.describe());
  rebuilt.set_params(net.get_params());
  CHECK(rebuilt.checksum() == net.checksum());

  Matrix x(3, 2);
  x.setRandom();
  CHECK((rebuilt.forward(x) - net.forward(x)).norm() == doctest::Approx(0.0));
}

TEST_CASE("adam minimizes a convex quadratic") {
  // f(p) = ||p - target||^2
  Vector target(3);
  target << 1.0, -2.0, 0.5;
  Vector p = Vector::Zero(3);
  AdamOptimizer opt(3, 0.05);
  for (int i = 0; i < 2000; ++i) {
    Vector grad = 2.0 * (p - target);
    opt.step(p, grad);
  }
  CHECK((p - target).norm() < 1e-3);
}

TEST_CASE("clip_params bounds every parameter") {
  Rng rng(5, "nn-test");
  Net net = make_mlp(2, {16}, 1, Act::relu, Act::identity);
  net.init_params(rng);
  Vector big = net.get_params() * 100.0;
  net.set_params(big);
  clip_params(net, 0.03);
  Vector p = net.get_params();
  CHECK(p.maxCoeff() <= 0.03);
  CHECK(p.minCoeff() >= -0.03);
}

TEST_CASE("forward_prefix stops at the requested layer") {
  Rng rng(6, "nn-test");
  Net net = make_mlp(2, {7}, 3, Act::relu, Act::identity);
  net.init_params(rng);
  Matrix x(2, 4);
  x.setRandom();
  // Layers: dense, act, dense -> prefix of 2 gives the hidden activation.
  Matrix hidden = net.forward_prefix(x, 2);
  CHECK(hidden.rows() == 7);
  Matrix full = net.forward_prefix(x, net.size());
  CHECK((full - net.forward(x)).norm() == doctest::Approx(0.0));
}
