#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <span>
#include <vector>

#include "lcmh/dataset.hpp"
#include "lcmh/matrix.hpp"
#include "lcmh/meta_embed.hpp"

namespace lcmh {

// Feature matrices V are c x n (one column per sample). B holds +-1 entries, same shape.

/// Phi_ij = 1/2 <vx_i, vy_j>; result is n_x x n_y.
DenseMatrix pairwise_phi(const DenseMatrix& vx, const DenseMatrix& vy);

/// -sum_ij (a_ij Phi_ij - softplus(Phi_ij)).
double nll_loss(const DenseMatrix& phi, const AffinityMatrix& affinity);
/// ||B - Vx||_F^2 + ||B - Vy||_F^2
double quantization_loss(const DenseMatrix& codes, const DenseMatrix& vx, const DenseMatrix& vy);
/// ||Vx 1||^2 + ||Vy 1||^2
double balance_loss(const DenseMatrix& vx, const DenseMatrix& vy);

struct LossBreakdown {
  double nll = 0.0;
  double quantization = 0.0;  // unweighted
  double balance = 0.0;       // unweighted
  double total = 0.0;         // nll + alpha * quantization + beta * balance

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

LossBreakdown objective(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                        const DenseMatrix& codes, double alpha, double beta);

/// dJ/dVx restricted to `columns` of Vx (c x |columns|):
///   1/2 sum_j (sigma(Phi_ij) - a_ij) vy_j + 2 alpha (vx_i - b_i) + 2 beta Vx 1
DenseMatrix grad_vx_columns(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                            const DenseMatrix& codes, double alpha, double beta,
                            std::span<const std::size_t> columns);
/// Mirror of grad_vx_columns for the text side; affinity is still indexed (image, text).
DenseMatrix grad_vy_columns(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                            const DenseMatrix& codes, double alpha, double beta,
                            std::span<const std::size_t> columns);
DenseMatrix grad_vx(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                    const DenseMatrix& codes, double alpha, double beta);
DenseMatrix grad_vy(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                    const DenseMatrix& codes, double alpha, double beta);

/// sign(Vx + Vy) with sign(0) = +1.
DenseMatrix update_codes(const DenseMatrix& vx, const DenseMatrix& vy);

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  // The gradient is a raw sum over all n samples, so the stable step shrinks with n.
  // This default suits the /10 Flickr-shaped set (n = 1050).
  double learning_rate = 1e-7;
  double momentum = 0.0;
  /// Learning-rate multiplier for the weight and eta networks.
  double memory_lr_scale = 1.0;
  std::size_t epochs = 150;
  std::size_t batch_columns = 64;
  std::uint64_t seed = 1;
  std::size_t code_length = 32;
  std::vector<std::size_t> hidden_x{128};
  std::vector<std::size_t> hidden_y{128};
  Activation hidden_activation = Activation::tanh;
  EtaSettings eta;
  WeightNorm weight_norm = WeightNorm::softmax;
  bool use_memory = true;
  std::size_t head_threshold = 100;

  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Trained hashing model: both modality embedders, their frozen prototype banks and the
/// unified training codes.
struct HashModel {
  MetaEmbedder image;
  MetaEmbedder text;
  PrototypeBank image_bank;
  PrototypeBank text_bank;
  HeadTailPartition partition;
  DenseMatrix codes;  // c x n_train, entries +-1
  double alpha = 1.0;
  double beta = 1.0;

  std::size_t code_length() const noexcept { return image.code_length(); }

  friend bool operator==(const HashModel&, const HashModel&) = default;
};

enum class Modality { image, text };

/// Meta features (c x n) of samples x features input through one side of the model.
DenseMatrix encode_features(const HashModel& model, const DenseMatrix& features, Modality modality);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown loss;     // after the code update
  double total_before_code_update = 0.0;
};

struct TrainResult {
  HashModel model;
  LossBreakdown initial;
  std::vector<EpochRecord> history;
};

/// Per-epoch hook; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Alternating optimization over the training rows of `data`:
///  per epoch (1) refresh both prototype banks from current direct features,
///  (2) minibatch SGD on the image side then the text side against the other side's
///  cached features, (3) recompute the codes.
/// Throws TrainingError on non-finite values, ConfigError on invalid configs.
TrainResult train(const MultiModalDataset& data, std::span<const std::size_t> train_rows,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// CSV: epoch,nll,quantization,balance,total
std::string loss_history_csv(std::span<const EpochRecord> history);

}  // namespace lcmh
