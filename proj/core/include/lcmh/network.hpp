#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lcmh/activation.hpp"
#include "lcmh/matrix.hpp"

namespace lcmh {

struct LayerSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  Activation activation = Activation::identity;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Gradient (or velocity) buffers laid out exactly like a FeedForwardNet's parameters.
struct ParamGrads {
  std::vector<DenseMatrix> weights;          // output_dim x input_dim per layer
  std::vector<std::vector<double>> biases;   // output_dim per layer

  /// this += other; shapes must match.
  void accumulate(const ParamGrads& other);
  void scale(double factor);
  bool all_finite() const noexcept;
  /// Concatenation in declaration order: layer 0 weights (row-major), layer 0 bias, layer 1 ...
  std::vector<double> flatten() const;
};

/// Fully connected feed-forward network; weights map input_dim -> output_dim.
class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  /// Zero-initialized parameters. Throws ShapeError if consecutive layer dims do not chain
  /// or any dim is zero.
  explicit FeedForwardNet(std::vector<LayerSpec> layers);

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static FeedForwardNet glorot(std::vector<LayerSpec> layers, std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const noexcept { return specs_; }
  std::size_t layer_count() const noexcept { return specs_.size(); }
  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  std::size_t parameter_count() const noexcept;

  DenseMatrix& weights(std::size_t layer) { return weights_.at(layer); }
  const DenseMatrix& weights(std::size_t layer) const { return weights_.at(layer); }
  std::vector<double>& bias(std::size_t layer) { return biases_.at(layer); }
  const std::vector<double>& bias(std::size_t layer) const { return biases_.at(layer); }

  /// Flat parameter access in the same order as ParamGrads::flatten().
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  ParamGrads zero_grads() const;

  friend bool operator==(const FeedForwardNet&, const FeedForwardNet&) = default;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<DenseMatrix> weights_;
  std::vector<std::vector<double>> biases_;
};

/// Per-layer values recorded by forward() for backward().
struct ForwardCache {
  std::vector<DenseMatrix> inputs;           // input to layer k (samples x input_dim)
  std::vector<DenseMatrix> pre_activations;  // samples x output_dim
  std::vector<DenseMatrix> post_activations;
};

struct ForwardResult {
  DenseMatrix output;  // samples x output_dim
  ForwardCache cache;
};

struct BackwardResult {
  ParamGrads params;
  DenseMatrix input_grad;  // samples x input_dim
};

/// `batch` is samples x features.
ForwardResult forward(const FeedForwardNet& net, const DenseMatrix& batch);
/// Output only; skips recording the cache.
DenseMatrix predict(const FeedForwardNet& net, const DenseMatrix& batch);

BackwardResult backward(const FeedForwardNet& net, const ForwardCache& cache,
                        const DenseMatrix& output_grad);

/// theta <- theta - lr * grad. Throws TrainingError (net untouched) on non-finite gradients.
void sgd_step(FeedForwardNet& net, const ParamGrads& grads, double learning_rate);

/// SGD with optional heavy-ball momentum: v <- mu v + g; theta <- theta - lr v.
class SgdOptimizer {
 public:
  SgdOptimizer(double learning_rate, double momentum = 0.0);

  void step(FeedForwardNet& net, const ParamGrads& grads);
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  double learning_rate_;
  double momentum_;
  ParamGrads velocity_;
};

/// Central differences of `loss` with respect to every parameter of `net`.
ParamGrads finite_diff_grad(const std::function<double(const FeedForwardNet&)>& loss,
                            const FeedForwardNet& net, double eps);

}  // namespace lcmh
