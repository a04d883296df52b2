#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lcmh/dataset.hpp"
#include "lcmh/network.hpp"

namespace lcmh {

/// How the memory trade-off eta is obtained for each sample.
///  - as_printed:   d_tail / d_head
///  - intent_ratio: d_head / d_tail (small near head prototypes, large near tail ones)
///  - learned:      sigmoid output of a shallow network on the direct feature
enum class EtaMode : std::uint32_t { as_printed = 0, intent_ratio = 1, learned = 2 };

enum class WeightNorm : std::uint32_t { softmax = 0, raw = 1 };

std::string_view to_string(EtaMode mode) noexcept;
EtaMode eta_mode_from_string(std::string_view name);
std::string_view to_string(WeightNorm norm) noexcept;
WeightNorm weight_norm_from_string(std::string_view name);

/// Per-class centroids of direct features; row i is the prototype of class i.
struct PrototypeBank {
  DenseMatrix centroids;  // L x c
  std::vector<std::size_t> counts;
  std::vector<bool> is_head;

  std::size_t num_classes() const noexcept { return counts.size(); }
  std::size_t code_length() const noexcept { return centroids.cols(); }
  bool active(std::size_t k) const noexcept { return counts[k] > 0; }
  bool has_active_head() const noexcept;
  bool has_active_tail() const noexcept;

  friend bool operator==(const PrototypeBank&, const PrototypeBank&) = default;
};

/// `direct` is samples x c. A multi-label sample contributes to each of its classes.
/// Classes without samples keep a zero centroid and count 0.
PrototypeBank compute_prototypes(const DenseMatrix& direct, const LabelMatrix& labels,
                                 const HeadTailPartition& partition);

struct EtaSettings {
  EtaMode mode = EtaMode::intent_ratio;
  double eta_max = 10.0;
  double epsilon = 1e-12;

  friend bool operator==(const EtaSettings&, const EtaSettings&) = default;
};

struct MemoryFeature {
  std::vector<double> memory;   // c
  std::vector<double> weights;  // L, zero on inactive classes
};

/// Weights over active classes from the weight net (softmax-normalized or raw), and
/// the memory feature sum_i w_i C_i. Throws ConfigError when every class is empty.
MemoryFeature memory_feature(std::span<const double> direct, const PrototypeBank& bank,
                             const FeedForwardNet& weight_net, WeightNorm norm = WeightNorm::softmax);

/// Ratio-mode eta, clamped to [0, eta_max]. Throws ConfigError without an active head
/// and an active tail class, or when called with EtaMode::learned.
double ratio_eta(std::span<const double> direct, const PrototypeBank& bank, const EtaSettings& settings);

struct EmbedderConfig {
  std::size_t input_dim = 1;
  std::size_t code_length = 32;
  std::size_t num_classes = 1;
  std::vector<std::size_t> hidden;  // widths of hidden layers of the basic net
  Activation hidden_activation = Activation::relu;
  EtaSettings eta;
  WeightNorm weight_norm = WeightNorm::softmax;
  bool use_memory = true;
};

/// Basic network producing direct features plus the prototype-memory meta network.
struct MetaEmbedder {
  FeedForwardNet basic_net;              // input -> c, identity output
  FeedForwardNet weight_net;             // c -> L logits
  std::optional<FeedForwardNet> eta_net; // c -> 1 sigmoid, learned mode only
  EtaSettings eta;
  WeightNorm weight_norm = WeightNorm::softmax;
  bool use_memory = true;

  static MetaEmbedder create(const EmbedderConfig& config, std::uint64_t seed);

  std::size_t input_dim() const noexcept { return basic_net.input_dim(); }
  std::size_t code_length() const noexcept { return basic_net.output_dim(); }
  std::size_t num_classes() const noexcept { return weight_net.output_dim(); }

  friend bool operator==(const MetaEmbedder&, const MetaEmbedder&) = default;
};

/// Single-sample view of the meta feature computation.
struct MetaFeature {
  std::vector<double> direct;
  std::vector<double> memory;
  std::vector<double> meta;  // direct + eta * memory
  double eta = 0.0;
  std::vector<double> weights;
};

/// Computes the meta feature of an already-computed direct feature. Learned mode
/// evaluates the embedder's eta net.
MetaFeature meta_feature(std::span<const double> direct, const PrototypeBank& bank,
                         const MetaEmbedder& embedder);

struct EmbedCache {
  ForwardCache basic;
  ForwardCache weight;
  ForwardCache eta_cache;
  DenseMatrix direct;   // b x c
  DenseMatrix weights;  // b x L
  DenseMatrix memory;   // b x c
  std::vector<double> eta;
};

struct EmbedResult {
  DenseMatrix meta;  // c x b
  EmbedCache cache;
};

/// `batch` is samples x input_dim; the result stacks meta features column-wise.
EmbedResult embed_batch(const MetaEmbedder& embedder, const DenseMatrix& batch, const PrototypeBank& bank);
/// Direct features only, samples x c.
DenseMatrix direct_features(const MetaEmbedder& embedder, const DenseMatrix& batch);

struct EmbedderGrads {
  ParamGrads basic;
  ParamGrads weight;
  ParamGrads eta;  // empty unless learned mode
};

/// Backpropagates dL/dV_meta (c x b). Prototypes and ratio-mode eta are constants.
EmbedderGrads embed_backward(const MetaEmbedder& embedder, const EmbedCache& cache,
                             const DenseMatrix& grad_meta, const PrototypeBank& bank);

}  // namespace lcmh
