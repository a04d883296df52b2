#include "lcmh/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "lcmh/errors.hpp"

namespace lcmh {

namespace {

void require_grad_shapes(const FeedForwardNet& net, const ParamGrads& grads) {
  if (grads.weights.size() != net.layer_count() || grads.biases.size() != net.layer_count())
    throw ShapeError("gradient layer count " + std::to_string(grads.weights.size()) +
                     " does not match net layer count " + std::to_string(net.layer_count()));
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    require_same_shape(net.weights(k), grads.weights[k], "weight gradient");
    if (grads.biases[k].size() != net.bias(k).size())
      throw ShapeError("bias gradient of layer " + std::to_string(k) + " has length " +
                       std::to_string(grads.biases[k].size()) + ", expected " +
                       std::to_string(net.bias(k).size()));
  }
}

}  // namespace

void ParamGrads::accumulate(const ParamGrads& other) {
  if (other.weights.size() != weights.size() || other.biases.size() != biases.size())
    throw ShapeError("ParamGrads::accumulate: layer count mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    require_same_shape(weights[k], other.weights[k], "ParamGrads::accumulate");
    auto dst = weights[k].values();
    auto src = other.weights[k].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    if (biases[k].size() != other.biases[k].size())
      throw ShapeError("ParamGrads::accumulate: bias length mismatch");
    for (std::size_t i = 0; i < biases[k].size(); ++i) biases[k][i] += other.biases[k][i];
  }
}

void ParamGrads::scale(double factor) {
  for (auto& w : weights)
    for (double& v : w.values()) v *= factor;
  for (auto& b : biases)
    for (double& v : b) v *= factor;
}

bool ParamGrads::all_finite() const noexcept {
  for (const auto& w : weights)
    if (!lcmh::all_finite(w)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> ParamGrads::flatten() const {
  std::vector<double> flat;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    auto w = weights[k].values();
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), biases[k].begin(), biases[k].end());
  }
  return flat;
}

FeedForwardNet::FeedForwardNet(std::vector<LayerSpec> layers) : specs_(std::move(layers)) {
  for (std::size_t k = 0; k < specs_.size(); ++k) {
    const auto& s = specs_[k];
    if (s.input_dim == 0 || s.output_dim == 0)
      throw ShapeError("layer " + std::to_string(k) + " has a zero dimension");
    if (k > 0 && specs_[k - 1].output_dim != s.input_dim)
      throw ShapeError("layer " + std::to_string(k - 1) + " output " +
                       std::to_string(specs_[k - 1].output_dim) + " does not chain into layer " +
                       std::to_string(k) + " input " + std::to_string(s.input_dim));
    weights_.emplace_back(s.output_dim, s.input_dim);
    biases_.emplace_back(s.output_dim, 0.0);
  }
}

FeedForwardNet FeedForwardNet::glorot(std::vector<LayerSpec> layers, std::uint64_t seed) {
  FeedForwardNet net(std::move(layers));
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& s = net.specs_[k];
    const double limit = std::sqrt(6.0 / static_cast<double>(s.input_dim + s.output_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : net.weights_[k].values()) w = dist(rng);
  }
  return net;
}

std::size_t FeedForwardNet::input_dim() const noexcept {
  return specs_.empty() ? 0 : specs_.front().input_dim;
}

std::size_t FeedForwardNet::output_dim() const noexcept {
  return specs_.empty() ? 0 : specs_.back().output_dim;
}

std::size_t FeedForwardNet::parameter_count() const noexcept {
  std::size_t count = 0;
  for (const auto& s : specs_) count += s.output_dim * (s.input_dim + 1);
  return count;
}

double& FeedForwardNet::parameter(std::size_t index) {
  for (std::size_t k = 0; k < specs_.size(); ++k) {
    const std::size_t w = weights_[k].size();
    if (index < w) return weights_[k].values()[index];
    index -= w;
    if (index < biases_[k].size()) return biases_[k][index];
    index -= biases_[k].size();
  }
  throw ShapeError("parameter index out of range");
}

double FeedForwardNet::parameter(std::size_t index) const {
  return const_cast<FeedForwardNet*>(this)->parameter(index);
}

ParamGrads FeedForwardNet::zero_grads() const {
  ParamGrads g;
  for (const auto& s : specs_) {
    g.weights.emplace_back(s.output_dim, s.input_dim);
    g.biases.emplace_back(s.output_dim, 0.0);
  }
  return g;
}

namespace {

DenseMatrix affine(const FeedForwardNet& net, std::size_t k, const DenseMatrix& input) {
  DenseMatrix pre = matmul_nt(input, net.weights(k));
  const auto& b = net.bias(k);
  for (std::size_t r = 0; r < pre.rows(); ++r) {
    auto row = pre.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return pre;
}

DenseMatrix apply(Activation act, const DenseMatrix& pre) {
  DenseMatrix post = pre;
  for (double& v : post.values()) v = activate(act, v);
  return post;
}

void require_input(const FeedForwardNet& net, const DenseMatrix& batch) {
  if (net.layer_count() == 0) throw ShapeError("forward: network has no layers");
  if (batch.cols() != net.input_dim())
    throw ShapeError("forward: batch " + batch.shape_string() + " does not match network input " +
                     "(samples x " + std::to_string(net.input_dim()) + ")");
}

}  // namespace

ForwardResult forward(const FeedForwardNet& net, const DenseMatrix& batch) {
  require_input(net, batch);
  ForwardResult result;
  DenseMatrix current = batch;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    DenseMatrix pre = affine(net, k, current);
    DenseMatrix post = apply(net.layers()[k].activation, pre);
    result.cache.inputs.push_back(std::move(current));
    result.cache.pre_activations.push_back(std::move(pre));
    result.cache.post_activations.push_back(post);
    current = std::move(post);
  }
  result.output = std::move(current);
  return result;
}

DenseMatrix predict(const FeedForwardNet& net, const DenseMatrix& batch) {
  require_input(net, batch);
  DenseMatrix current = batch;
  for (std::size_t k = 0; k < net.layer_count(); ++k)
    current = apply(net.layers()[k].activation, affine(net, k, current));
  return current;
}

BackwardResult backward(const FeedForwardNet& net, const ForwardCache& cache,
                        const DenseMatrix& output_grad) {
  const std::size_t layers = net.layer_count();
  if (cache.inputs.size() != layers || cache.pre_activations.size() != layers)
    throw ShapeError("backward: cache holds " + std::to_string(cache.inputs.size()) +
                     " layers, net has " + std::to_string(layers));
  require_same_shape(output_grad, cache.post_activations.back(), "backward: output_grad");

  BackwardResult result;
  result.params = net.zero_grads();
  DenseMatrix grad = output_grad;
  for (std::size_t k = layers; k-- > 0;) {
    const Activation act = net.layers()[k].activation;
    const DenseMatrix& pre = cache.pre_activations[k];
    const DenseMatrix& post = cache.post_activations[k];
    auto g = grad.values();
    auto p = pre.values();
    auto q = post.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= activation_derivative(act, p[i], q[i]);

    // grad: samples x out, input: samples x in
    result.params.weights[k] = matmul_tn(grad, cache.inputs[k]);
    auto& db = result.params.biases[k];
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      auto row = grad.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) db[j] += row[j];
    }
    grad = matmul(grad, net.weights(k));
  }
  result.input_grad = std::move(grad);
  return result;
}

void sgd_step(FeedForwardNet& net, const ParamGrads& grads, double learning_rate) {
  require_grad_shapes(net, grads);
  if (!grads.all_finite()) throw TrainingError("sgd_step: non-finite gradient");
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    auto w = net.weights(k).values();
    auto gw = grads.weights[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * gw[i];
    auto& b = net.bias(k);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= learning_rate * grads.biases[k][i];
  }
}

SgdOptimizer::SgdOptimizer(double learning_rate, double momentum)
    : learning_rate_(learning_rate), momentum_(momentum) {
  if (!(learning_rate >= 0.0) || !(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("SgdOptimizer: learning rate must be >= 0 and momentum in [0, 1)");
}

void SgdOptimizer::step(FeedForwardNet& net, const ParamGrads& grads) {
  if (momentum_ == 0.0) {
    sgd_step(net, grads, learning_rate_);
    return;
  }
  require_grad_shapes(net, grads);
  if (!grads.all_finite()) throw TrainingError("sgd_step: non-finite gradient");
  if (velocity_.weights.empty()) velocity_ = net.zero_grads();
  velocity_.scale(momentum_);
  velocity_.accumulate(grads);
  sgd_step(net, velocity_, learning_rate_);
}

ParamGrads finite_diff_grad(const std::function<double(const FeedForwardNet&)>& loss,
                            const FeedForwardNet& net, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
  FeedForwardNet probe = net;
  ParamGrads grads = net.zero_grads();
  std::size_t index = 0;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    auto central = [&](double& slot) {
      double& param = probe.parameter(index++);
      const double saved = param;
      param = saved + eps;
      const double up = loss(probe);
      param = saved - eps;
      const double down = loss(probe);
      param = saved;
      slot = (up - down) / (2.0 * eps);
    };
    for (double& g : grads.weights[k].values()) central(g);
    for (double& g : grads.biases[k]) central(g);
  }
  return grads;
}

}  // namespace lcmh
