#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lcmh/errors.hpp"
#include "lcmh/hash_learn.hpp"
#include "lcmh/meta_embed.hpp"
#include "lcmh/network.hpp"

namespace lcmh::cli {
namespace {

DenseMatrix normal_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

std::vector<double> maybe_corrupt(std::vector<double> g, bool corrupt) {
  if (corrupt)
    for (double& v : g) v *= 1.01;
  return g;
}

std::vector<double> as_vector(const DenseMatrix& m) { return {m.values().begin(), m.values().end()}; }

SuiteResult objective_suite(const GradcheckOptions& o, std::mt19937_64& rng) {
  SuiteResult r{"feature_gradient", o.instances, 0.0};
  std::uniform_int_distribution<std::size_t> dim(2, 8);
  std::bernoulli_distribution coin(0.4);
  for (std::size_t t = 0; t < o.instances; ++t) {
    const std::size_t c = dim(rng), n = dim(rng);
    auto vx = normal_matrix(c, n, rng), vy = normal_matrix(c, n, rng);
    DenseMatrix codes(c, n);
    for (double& b : codes.values()) b = coin(rng) ? 1.0 : -1.0;
    AffinityMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a.set(i, j, coin(rng));

    for (bool image : {true, false}) {
      auto analytic = maybe_corrupt(
          as_vector(image ? grad_vx(vx, vy, a, codes, o.alpha, o.beta) : grad_vy(vx, vy, a, codes, o.alpha, o.beta)),
          o.corrupt);
      std::vector<double> numeric(c * n);
      DenseMatrix& v = image ? vx : vy;
      for (std::size_t k = 0; k < c * n; ++k) {
        const double saved = v.values()[k];
        v.values()[k] = saved + o.eps;
        const double up = objective(vx, vy, a, codes, o.alpha, o.beta).total;
        v.values()[k] = saved - o.eps;
        const double down = objective(vx, vy, a, codes, o.alpha, o.beta).total;
        v.values()[k] = saved;
        numeric[k] = (up - down) / (2.0 * o.eps);
      }
      r.max_relative_error = std::max(r.max_relative_error, relative_error(analytic, numeric));
    }
  }
  return r;
}

SuiteResult network_suite(const GradcheckOptions& o, std::mt19937_64& rng) {
  SuiteResult r{"network_backward", o.instances, 0.0};
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  const Activation acts[] = {Activation::identity, Activation::relu, Activation::sigmoid, Activation::tanh};
  for (std::size_t t = 0; t < o.instances; ++t) {
    const std::size_t in = dim(rng), hidden = dim(rng), out = dim(rng), batch = dim(rng);
    auto net = FeedForwardNet::glorot({{in, hidden, acts[t % 4]}, {hidden, out, Activation::identity}}, rng());
    auto input = normal_matrix(batch, in, rng);
    auto weights = normal_matrix(batch, out, rng);
    auto loss = [&](const FeedForwardNet& n) {
      auto y = predict(n, input);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * weights.values()[i];
      return s;
    };
    auto fwd = forward(net, input);
    auto analytic = maybe_corrupt(backward(net, fwd.cache, weights).params.flatten(), o.corrupt);
    auto numeric = finite_diff_grad(loss, net, o.eps).flatten();
    r.max_relative_error = std::max(r.max_relative_error, relative_error(analytic, numeric));
  }
  return r;
}

SuiteResult embed_suite(const GradcheckOptions& o, std::mt19937_64& rng) {
  SuiteResult r{"meta_embed_backward", o.instances, 0.0};
  for (std::size_t t = 0; t < o.instances; ++t) {
    EmbedderConfig cfg;
    cfg.input_dim = 4;
    cfg.code_length = 3;
    cfg.num_classes = 4;
    cfg.hidden = {5};
    cfg.hidden_activation = Activation::tanh;
    cfg.eta.mode = EtaMode::learned;
    auto e = MetaEmbedder::create(cfg, rng());
    PrototypeBank bank{normal_matrix(4, 3, rng), {3, 3, 1, 1}, {true, true, false, false}};
    auto batch = normal_matrix(5, 4, rng);
    auto weights = normal_matrix(3, 5, rng);
    auto loss = [&](const MetaEmbedder& m) {
      auto meta = embed_batch(m, batch, bank).meta;
      double s = 0.0;
      for (std::size_t i = 0; i < meta.size(); ++i) s += meta.values()[i] * weights.values()[i];
      return s;
    };
    auto emb = embed_batch(e, batch, bank);
    auto grads = embed_backward(e, emb.cache, weights, bank);
    std::vector<double> analytic, numeric;
    auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    append(analytic, grads.basic.flatten());
    append(analytic, grads.weight.flatten());
    append(analytic, grads.eta.flatten());
    append(numeric, finite_diff_grad([&](const FeedForwardNet& n) { auto m = e; m.basic_net = n; return loss(m); },
                                     e.basic_net, o.eps).flatten());
    append(numeric, finite_diff_grad([&](const FeedForwardNet& n) { auto m = e; m.weight_net = n; return loss(m); },
                                     e.weight_net, o.eps).flatten());
    append(numeric, finite_diff_grad([&](const FeedForwardNet& n) { auto m = e; m.eta_net = n; return loss(m); },
                                     *e.eta_net, o.eps).flatten());
    r.max_relative_error =
        std::max(r.max_relative_error, relative_error(maybe_corrupt(analytic, o.corrupt), numeric));
  }
  return r;
}

}  // namespace

std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& options) {
  if (!(options.eps > 0.0)) throw ConfigError("gradcheck eps must be positive");
  if (options.instances == 0) throw ConfigError("gradcheck needs at least one instance");
  std::mt19937_64 rng(options.seed);
  return {objective_suite(options, rng), network_suite(options, rng), embed_suite(options, rng)};
}

}  // namespace lcmh::cli
