#include "lcmh/meta_embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lcmh/errors.hpp"

namespace lcmh {

std::string_view to_string(EtaMode mode) noexcept {
  switch (mode) {
    case EtaMode::as_printed: return "as_printed";
    case EtaMode::intent_ratio: return "intent_ratio";
    case EtaMode::learned: return "learned";
  }
  return "unknown";
}

EtaMode eta_mode_from_string(std::string_view name) {
  if (name == "as_printed") return EtaMode::as_printed;
  if (name == "intent_ratio") return EtaMode::intent_ratio;
  if (name == "learned") return EtaMode::learned;
  throw ConfigError("unknown eta mode '" + std::string(name) + "'");
}

std::string_view to_string(WeightNorm norm) noexcept {
  return norm == WeightNorm::softmax ? "softmax" : "raw";
}

WeightNorm weight_norm_from_string(std::string_view name) {
  if (name == "softmax") return WeightNorm::softmax;
  if (name == "raw") return WeightNorm::raw;
  throw ConfigError("unknown weight normalization '" + std::string(name) + "'");
}

bool PrototypeBank::has_active_head() const noexcept {
  for (std::size_t k = 0; k < num_classes(); ++k)
    if (active(k) && is_head[k]) return true;
  return false;
}

bool PrototypeBank::has_active_tail() const noexcept {
  for (std::size_t k = 0; k < num_classes(); ++k)
    if (active(k) && !is_head[k]) return true;
  return false;
}

PrototypeBank compute_prototypes(const DenseMatrix& direct, const LabelMatrix& labels,
                                 const HeadTailPartition& partition) {
  if (direct.rows() != labels.rows())
    throw ShapeError("compute_prototypes: " + std::to_string(direct.rows()) + " features vs " +
                     std::to_string(labels.rows()) + " label rows");
  if (partition.num_classes() != labels.cols())
    throw ShapeError("compute_prototypes: partition covers " + std::to_string(partition.num_classes()) +
                     " classes, labels have " + std::to_string(labels.cols()));
  const std::size_t classes = labels.cols();
  PrototypeBank bank{DenseMatrix(classes, direct.cols()), std::vector<std::size_t>(classes, 0),
                     partition.is_head};
  for (std::size_t i = 0; i < direct.rows(); ++i) {
    auto v = direct.row(i);
    for (std::size_t k = 0; k < classes; ++k) {
      if (!labels(i, k)) continue;
      ++bank.counts[k];
      auto c = bank.centroids.row(k);
      for (std::size_t t = 0; t < c.size(); ++t) c[t] += v[t];
    }
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (bank.counts[k] == 0) continue;
    const double inv = 1.0 / static_cast<double>(bank.counts[k]);
    for (double& x : bank.centroids.row(k)) x *= inv;
  }
  return bank;
}

namespace {

void require_active(const PrototypeBank& bank) {
  for (std::size_t k = 0; k < bank.num_classes(); ++k)
    if (bank.active(k)) return;
  throw ConfigError("prototype bank has no non-empty class");
}

// Turns weight-net logits into prototype weights in place; inactive classes get 0.
void normalize_weights(std::span<double> logits, const PrototypeBank& bank, WeightNorm norm) {
  if (norm == WeightNorm::raw) {
    for (std::size_t k = 0; k < logits.size(); ++k)
      if (!bank.active(k)) logits[k] = 0.0;
    return;
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (bank.active(k)) top = std::max(top, logits[k]);
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    logits[k] = bank.active(k) ? std::exp(logits[k] - top) : 0.0;
    total += logits[k];
  }
  for (double& w : logits) w /= total;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double d = a[t] - b[t];
    acc += d * d;
  }
  return acc;
}

void check_weight_net(const FeedForwardNet& weight_net, const PrototypeBank& bank) {
  if (weight_net.input_dim() != bank.code_length() || weight_net.output_dim() != bank.num_classes())
    throw ShapeError("weight net maps " + std::to_string(weight_net.input_dim()) + " -> " +
                     std::to_string(weight_net.output_dim()) + " but bank is " +
                     bank.centroids.shape_string());
}

}  // namespace

MemoryFeature memory_feature(std::span<const double> direct, const PrototypeBank& bank,
                             const FeedForwardNet& weight_net, WeightNorm norm) {
  require_active(bank);
  check_weight_net(weight_net, bank);
  if (direct.size() != bank.code_length())
    throw ShapeError("memory_feature: direct feature length " + std::to_string(direct.size()) +
                     " vs code length " + std::to_string(bank.code_length()));
  DenseMatrix input(1, direct.size(), std::vector<double>(direct.begin(), direct.end()));
  DenseMatrix logits = predict(weight_net, input);
  MemoryFeature out;
  out.weights.assign(logits.values().begin(), logits.values().end());
  normalize_weights(out.weights, bank, norm);
  out.memory.assign(bank.code_length(), 0.0);
  for (std::size_t k = 0; k < bank.num_classes(); ++k) {
    if (!bank.active(k)) continue;
    auto c = bank.centroids.row(k);
    for (std::size_t t = 0; t < c.size(); ++t) out.memory[t] += out.weights[k] * c[t];
  }
  return out;
}

double ratio_eta(std::span<const double> direct, const PrototypeBank& bank, const EtaSettings& settings) {
  if (settings.mode == EtaMode::learned) throw ConfigError("ratio_eta called in learned mode");
  if (!bank.has_active_head() || !bank.has_active_tail())
    throw ConfigError("ratio eta needs at least one non-empty head and one non-empty tail class");
  double d_head = std::numeric_limits<double>::infinity();
  double d_tail = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < bank.num_classes(); ++k) {
    if (!bank.active(k)) continue;
    const double d = squared_distance(direct, bank.centroids.row(k));
    double& slot = bank.is_head[k] ? d_head : d_tail;
    slot = std::min(slot, d);
  }
  const double num = settings.mode == EtaMode::intent_ratio ? d_head : d_tail;
  const double den = settings.mode == EtaMode::intent_ratio ? d_tail : d_head;
  const double eta = num / std::max(den, settings.epsilon);
  return std::clamp(eta, 0.0, settings.eta_max);
}

MetaEmbedder MetaEmbedder::create(const EmbedderConfig& config, std::uint64_t seed) {
  if (config.code_length == 0 || config.input_dim == 0 || config.num_classes == 0)
    throw ConfigError("embedder dimensions must be >= 1");
  std::vector<LayerSpec> layers;
  std::size_t width = config.input_dim;
  for (std::size_t h : config.hidden) {
    layers.push_back({width, h, config.hidden_activation});
    width = h;
  }
  layers.push_back({width, config.code_length, Activation::identity});

  MetaEmbedder e;
  e.basic_net = FeedForwardNet::glorot(std::move(layers), seed);
  e.weight_net = FeedForwardNet::glorot({{config.code_length, config.num_classes, Activation::identity}},
                                        seed ^ 0x9e3779b97f4a7c15ULL);
  if (config.eta.mode == EtaMode::learned)
    e.eta_net = FeedForwardNet::glorot({{config.code_length, 1, Activation::sigmoid}},
                                       seed ^ 0xc2b2ae3d27d4eb4fULL);
  e.eta = config.eta;
  e.weight_norm = config.weight_norm;
  e.use_memory = config.use_memory;
  return e;
}

MetaFeature meta_feature(std::span<const double> direct, const PrototypeBank& bank,
                         const MetaEmbedder& embedder) {
  MetaFeature f;
  f.direct.assign(direct.begin(), direct.end());
  if (!embedder.use_memory) {
    f.memory.assign(direct.size(), 0.0);
    f.meta = f.direct;
    return f;
  }
  auto mem = memory_feature(direct, bank, embedder.weight_net, embedder.weight_norm);
  f.memory = std::move(mem.memory);
  f.weights = std::move(mem.weights);
  if (embedder.eta.mode == EtaMode::learned) {
    if (!embedder.eta_net) throw ConfigError("learned eta mode without an eta network");
    DenseMatrix input(1, direct.size(), f.direct);
    f.eta = predict(*embedder.eta_net, input)(0, 0);
  } else {
    f.eta = ratio_eta(direct, bank, embedder.eta);
  }
  f.meta.resize(direct.size());
  for (std::size_t t = 0; t < direct.size(); ++t) f.meta[t] = f.direct[t] + f.eta * f.memory[t];
  return f;
}

DenseMatrix direct_features(const MetaEmbedder& embedder, const DenseMatrix& batch) {
  return predict(embedder.basic_net, batch);
}

EmbedResult embed_batch(const MetaEmbedder& embedder, const DenseMatrix& batch, const PrototypeBank& bank) {
  EmbedResult result;
  auto basic = forward(embedder.basic_net, batch);
  EmbedCache& cache = result.cache;
  cache.basic = std::move(basic.cache);
  cache.direct = std::move(basic.output);
  const std::size_t b = cache.direct.rows();
  const std::size_t c = cache.direct.cols();

  if (!embedder.use_memory) {
    cache.eta.assign(b, 0.0);
    cache.memory = DenseMatrix(b, c);
    result.meta = transpose(cache.direct);
    return result;
  }

  require_active(bank);
  check_weight_net(embedder.weight_net, bank);
  if (bank.code_length() != c) throw ShapeError("embed_batch: bank code length differs from basic net");

  auto weight = forward(embedder.weight_net, cache.direct);
  cache.weight = std::move(weight.cache);
  cache.weights = std::move(weight.output);
  for (std::size_t r = 0; r < b; ++r) normalize_weights(cache.weights.row(r), bank, embedder.weight_norm);
  cache.memory = matmul(cache.weights, bank.centroids);

  cache.eta.resize(b);
  if (embedder.eta.mode == EtaMode::learned) {
    if (!embedder.eta_net) throw ConfigError("learned eta mode without an eta network");
    auto eta = forward(*embedder.eta_net, cache.direct);
    cache.eta_cache = std::move(eta.cache);
    for (std::size_t r = 0; r < b; ++r) cache.eta[r] = eta.output(r, 0);
  } else {
    for (std::size_t r = 0; r < b; ++r) cache.eta[r] = ratio_eta(cache.direct.row(r), bank, embedder.eta);
  }

  result.meta = DenseMatrix(c, b);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t t = 0; t < c; ++t)
      result.meta(t, r) = cache.direct(r, t) + cache.eta[r] * cache.memory(r, t);
  return result;
}

EmbedderGrads embed_backward(const MetaEmbedder& embedder, const EmbedCache& cache,
                             const DenseMatrix& grad_meta, const PrototypeBank& bank) {
  const std::size_t b = cache.direct.rows();
  const std::size_t c = cache.direct.cols();
  if (grad_meta.rows() != c || grad_meta.cols() != b)
    throw ShapeError("embed_backward: gradient " + grad_meta.shape_string() + " vs meta features " +
                     std::to_string(c) + "x" + std::to_string(b));

  EmbedderGrads grads;
  DenseMatrix grad_direct = transpose(grad_meta);
  grads.weight = embedder.weight_net.zero_grads();
  if (embedder.eta_net) grads.eta = embedder.eta_net->zero_grads();

  if (embedder.use_memory) {
    // d memory = eta * g ; d w_k = <d memory, C_k>
    DenseMatrix grad_memory = grad_direct;
    for (std::size_t r = 0; r < b; ++r)
      for (double& v : grad_memory.row(r)) v *= cache.eta[r];
    DenseMatrix grad_weights = matmul_nt(grad_memory, bank.centroids);
    DenseMatrix grad_logits(b, bank.num_classes());
    for (std::size_t r = 0; r < b; ++r) {
      auto w = cache.weights.row(r);
      auto gw = grad_weights.row(r);
      auto gz = grad_logits.row(r);
      if (embedder.weight_norm == WeightNorm::softmax) {
        double dot = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * gw[k];
        for (std::size_t k = 0; k < w.size(); ++k) gz[k] = bank.active(k) ? w[k] * (gw[k] - dot) : 0.0;
      } else {
        for (std::size_t k = 0; k < w.size(); ++k) gz[k] = bank.active(k) ? gw[k] : 0.0;
      }
    }
    auto weight_back = backward(embedder.weight_net, cache.weight, grad_logits);
    grads.weight = std::move(weight_back.params);

    if (embedder.eta.mode == EtaMode::learned) {
      DenseMatrix grad_eta(b, 1);
      for (std::size_t r = 0; r < b; ++r) {
        double acc = 0.0;
        for (std::size_t t = 0; t < c; ++t) acc += grad_direct(r, t) * cache.memory(r, t);
        grad_eta(r, 0) = acc;
      }
      auto eta_back = backward(*embedder.eta_net, cache.eta_cache, grad_eta);
      grads.eta = std::move(eta_back.params);
      auto src = eta_back.input_grad.values();
      auto dst = grad_direct.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    auto src = weight_back.input_grad.values();
    auto dst = grad_direct.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  grads.basic = backward(embedder.basic_net, cache.basic, grad_direct).params;
  return grads;
}

}  // namespace lcmh
