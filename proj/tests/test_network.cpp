#include <cmath>
#include <random>

#include "doctest.h"
#include "lcmh/errors.hpp"
#include "lcmh/network.hpp"
#include "test_support.hpp"

using namespace lcmh;
using lcmh::testing::random_matrix;
using lcmh::testing::relative_error;

namespace {

// Scalar re-computation of a dense forward pass, independent of the matrix helpers.
DenseMatrix scalar_forward(const FeedForwardNet& net, const DenseMatrix& batch) {
  std::vector<std::vector<double>> rows;
  for (std::size_t s = 0; s < batch.rows(); ++s) rows.emplace_back(batch.row(s).begin(), batch.row(s).end());
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& spec = net.layers()[k];
    for (auto& row : rows) {
      std::vector<double> next(spec.output_dim);
      for (std::size_t o = 0; o < spec.output_dim; ++o) {
        double acc = net.bias(k)[o];
        for (std::size_t i = 0; i < spec.input_dim; ++i) acc += net.weights(k)(o, i) * row[i];
        switch (spec.activation) {
          case Activation::identity: next[o] = acc; break;
          case Activation::relu: next[o] = acc > 0 ? acc : 0; break;
          case Activation::sigmoid: next[o] = 1.0 / (1.0 + std::exp(-acc)); break;
          case Activation::tanh: next[o] = std::tanh(acc); break;
        }
      }
      row = std::move(next);
    }
  }
  DenseMatrix out(rows.size(), net.output_dim());
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t o = 0; o < rows[s].size(); ++o) out(s, o) = rows[s][o];
  return out;
}

double weighted_sum(const DenseMatrix& out, const DenseMatrix& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out.values()[i] * weights.values()[i];
  return acc;
}

}  // namespace

TEST_SUITE("tensor-core") {

TEST_CASE("identity layer passes its input through") {
  FeedForwardNet net({{3, 3, Activation::identity}});
  net.weights(0) = DenseMatrix::identity(3);
  DenseMatrix input(2, 3, std::vector<double>{1, -2, 3, 0.5, 0, -7});
  CHECK(forward(net, input).output == input);
}

TEST_CASE("zero-weight sigmoid unit outputs one half") {
  FeedForwardNet net({{4, 1, Activation::sigmoid}});
  std::mt19937_64 rng(3);
  auto out = forward(net, random_matrix(5, 4, rng, 10.0)).output;
  for (double v : out.values()) CHECK(v == 0.5);
}

TEST_CASE("forward matches a scalar loop trace") {
  std::mt19937_64 rng(11);
  auto net = FeedForwardNet::glorot({{6, 5, Activation::tanh}, {5, 3, Activation::identity}}, 42);
  for (double& b : net.bias(0)) b = 0.1;
  auto batch = random_matrix(4, 6, rng);
  auto got = forward(net, batch).output;
  auto want = scalar_forward(net, batch);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.values()[i] == doctest::Approx(want.values()[i]).epsilon(1e-14));
  CHECK(predict(net, batch) == got);
}

TEST_CASE("forward reports both shapes on mismatch") {
  FeedForwardNet net({{3, 2, Activation::relu}});
  try {
    (void)forward(net, DenseMatrix(2, 4));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x4") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("layer dims must chain") {
  CHECK_THROWS_AS(FeedForwardNet({{3, 4, Activation::relu}, {5, 2, Activation::identity}}), ShapeError);
  CHECK_THROWS_AS(FeedForwardNet({{0, 4, Activation::relu}}), ShapeError);
}

TEST_CASE("linear net with sum loss: weight gradient rows are input column sums") {
  std::mt19937_64 rng(5);
  auto net = FeedForwardNet::glorot({{4, 3, Activation::identity}}, 1);
  auto batch = random_matrix(6, 4, rng);
  auto fwd = forward(net, batch);
  auto back = backward(net, fwd.cache, DenseMatrix(6, 3, 1.0));
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t i = 0; i < 4; ++i) {
      double col_sum = 0.0;
      for (std::size_t s = 0; s < 6; ++s) col_sum += batch(s, i);
      CHECK(back.params.weights[0](o, i) == doctest::Approx(col_sum).epsilon(1e-13));
    }
    CHECK(back.params.biases[0][o] == doctest::Approx(6.0));
  }
}

TEST_CASE("zero output gradient gives zero gradients") {
  std::mt19937_64 rng(6);
  auto net = FeedForwardNet::glorot({{4, 5, Activation::relu}, {5, 2, Activation::sigmoid}}, 2);
  auto fwd = forward(net, random_matrix(3, 4, rng));
  auto back = backward(net, fwd.cache, DenseMatrix(3, 2));
  for (double g : back.params.flatten()) CHECK(g == 0.0);
  for (double g : back.input_grad.values()) CHECK(g == 0.0);
}

TEST_CASE("backward rejects a mis-shaped output gradient") {
  auto net = FeedForwardNet::glorot({{2, 2, Activation::tanh}}, 2);
  auto fwd = forward(net, DenseMatrix(3, 2, 0.1));
  CHECK_THROWS_AS(backward(net, fwd.cache, DenseMatrix(2, 2)), ShapeError);
}

TEST_CASE("backward matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto net = FeedForwardNet::glorot(
        {{5, 6, Activation::tanh}, {6, 4, Activation::sigmoid}, {4, 3, Activation::identity}}, seed + 100);
    for (std::size_t k = 0; k < net.layer_count(); ++k)
      for (double& b : net.bias(k)) b = std::normal_distribution<double>(0, 0.3)(rng);
    auto batch = random_matrix(7, 5, rng);
    auto loss_weights = random_matrix(7, 3, rng);

    auto fwd = forward(net, batch);
    auto analytic = backward(net, fwd.cache, loss_weights).params.flatten();
    auto numeric = finite_diff_grad(
                       [&](const FeedForwardNet& probe) { return weighted_sum(predict(probe, batch), loss_weights); },
                       net, 1e-6)
                       .flatten();
    CHECK(relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("activation derivatives match finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> point(-4.0, 4.0);
  const double h = 1e-6;
  for (Activation act : {Activation::identity, Activation::relu, Activation::sigmoid, Activation::tanh}) {
    for (int i = 0; i < 100; ++i) {
      double x = point(rng);
      if (act == Activation::relu && std::abs(x) < 1e-3) x += 0.01;
      const double fd = (activate(act, x + h) - activate(act, x - h)) / (2 * h);
      CHECK(std::abs(activation_derivative(act, x, activate(act, x)) - fd) < 1e-6);
    }
  }
}

TEST_CASE("sigmoid and softplus stay finite on [-1e4, 1e4]") {
  for (double x = -1e4; x <= 1e4; x += 97.3) {
    CHECK(std::isfinite(sigmoid(x)));
    CHECK(std::isfinite(softplus(x)));
  }
  CHECK(sigmoid(-1e4) == 0.0);
  CHECK(sigmoid(1e4) == 1.0);
  CHECK(softplus(1e4) == 1e4);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("sgd_step arithmetic") {
  FeedForwardNet net({{1, 1, Activation::identity}});
  net.weights(0)(0, 0) = 1.0;
  auto grads = net.zero_grads();
  grads.weights[0](0, 0) = 2.0;

  FeedForwardNet frozen = net;
  sgd_step(frozen, grads, 0.0);
  CHECK(frozen == net);

  sgd_step(net, grads, 0.1);
  CHECK(net.weights(0)(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("sgd_step refuses non-finite gradients and leaves the net untouched") {
  auto net = FeedForwardNet::glorot({{2, 2, Activation::identity}}, 9);
  const auto before = net;
  auto grads = net.zero_grads();
  grads.biases[0][1] = std::nan("");
  CHECK_THROWS_AS(sgd_step(net, grads, 0.1), TrainingError);
  CHECK(net == before);
}

TEST_CASE("repeated steps on a convex quadratic decrease the loss monotonically") {
  std::mt19937_64 rng(21);
  auto net = FeedForwardNet::glorot({{3, 2, Activation::identity}}, 4);
  auto batch = random_matrix(10, 3, rng);
  auto target = random_matrix(10, 2, rng);
  auto loss_of = [&](const FeedForwardNet& n) {
    auto out = predict(n, batch);
    double l = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) l += 0.5 * std::pow(out.values()[i] - target.values()[i], 2);
    return l;
  };
  for (double momentum : {0.0, 0.5}) {
    auto model = net;
    SgdOptimizer opt(0.01, momentum);
    double prev = loss_of(model);
    for (int step = 0; step < 50; ++step) {
      auto fwd = forward(model, batch);
      DenseMatrix g = fwd.output;
      for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] -= target.values()[i];
      opt.step(model, backward(model, fwd.cache, g).params);
      const double cur = loss_of(model);
      if (momentum == 0.0) CHECK(cur <= prev);
      prev = cur;
    }
    CHECK(prev < loss_of(net));
  }
}

TEST_CASE("finite_diff_grad on closed forms") {
  FeedForwardNet net({{1, 1, Activation::identity}});
  net.weights(0)(0, 0) = 3.0;
  auto square = finite_diff_grad([](const FeedForwardNet& n) { return std::pow(n.weights(0)(0, 0), 2); }, net, 1e-6);
  CHECK(std::abs(square.weights[0](0, 0) - 6.0) < 1e-6);
  CHECK(square.biases[0][0] == 0.0);

  auto constant = finite_diff_grad([](const FeedForwardNet&) { return 4.2; }, net, 1e-6);
  for (double g : constant.flatten()) CHECK(g == 0.0);
  CHECK_THROWS_AS(finite_diff_grad([](const FeedForwardNet&) { return 0.0; }, net, 0.0), ConfigError);
}

TEST_CASE("glorot initialization is seeded and bounded") {
  const std::vector<LayerSpec> layers{{8, 4, Activation::relu}, {4, 2, Activation::identity}};
  auto a = FeedForwardNet::glorot(layers, 77);
  auto b = FeedForwardNet::glorot(layers, 77);
  auto c = FeedForwardNet::glorot(layers, 78);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const double limit = std::sqrt(6.0 / 12.0);
  for (double w : a.weights(0).values()) CHECK(std::abs(w) <= limit);
  std::mt19937_64 rng(1);
  auto batch = random_matrix(3, 8, rng);
  CHECK(predict(a, batch) == predict(b, batch));
}

}  // TEST_SUITE
