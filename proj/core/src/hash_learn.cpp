#include "lcmh/hash_learn.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "lcmh/errors.hpp"

namespace lcmh {

namespace {

void require_code_space(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity) {
  if (vx.rows() != vy.rows())
    throw ShapeError("code lengths differ: Vx " + vx.shape_string() + ", Vy " + vy.shape_string());
  if (affinity.rows() != vx.cols() || affinity.cols() != vy.cols())
    throw ShapeError("affinity " + std::to_string(affinity.rows()) + "x" + std::to_string(affinity.cols()) +
                     " does not match Vx " + vx.shape_string() + " / Vy " + vy.shape_string());
}

// Shared body of both gradient directions. `self` holds the columns being differentiated,
// `other` the opposite modality; a(i, j) indexes (self column, other column).
template <typename AffinityAt>
DenseMatrix grad_columns(const DenseMatrix& self, const DenseMatrix& other, AffinityAt a,
                         const DenseMatrix& codes, double alpha, double beta,
                         std::span<const std::size_t> columns) {
  require_same_shape(self, codes, "gradient: codes vs features");
  const std::size_t c = self.rows();
  const auto sums = row_sums(self);
  DenseMatrix selected = gather_columns(self, columns);
  // phi rows: one per selected column against every other-side column
  DenseMatrix phi = matmul_tn(selected, other);
  DenseMatrix coeff(columns.size(), other.cols());
  for (std::size_t r = 0; r < columns.size(); ++r)
    for (std::size_t j = 0; j < other.cols(); ++j)
      coeff(r, j) = 0.5 * (sigmoid(0.5 * phi(r, j)) - static_cast<double>(a(columns[r], j)));
  DenseMatrix grad = matmul_nt(other, coeff);  // c x |columns|
  for (std::size_t r = 0; r < columns.size(); ++r) {
    const std::size_t i = columns[r];
    for (std::size_t t = 0; t < c; ++t)
      grad(t, r) += 2.0 * alpha * (self(t, i) - codes(t, i)) + 2.0 * beta * sums[t];
  }
  return grad;
}

std::vector<std::size_t> all_columns(std::size_t n) {
  std::vector<std::size_t> cols(n);
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

}  // namespace

DenseMatrix pairwise_phi(const DenseMatrix& vx, const DenseMatrix& vy) {
  if (vx.rows() != vy.rows())
    throw ShapeError("pairwise_phi: Vx " + vx.shape_string() + " vs Vy " + vy.shape_string());
  DenseMatrix phi = matmul_tn(vx, vy);
  for (double& v : phi.values()) v *= 0.5;
  return phi;
}

double nll_loss(const DenseMatrix& phi, const AffinityMatrix& affinity) {
  if (phi.rows() != affinity.rows() || phi.cols() != affinity.cols())
    throw ShapeError("nll_loss: phi " + phi.shape_string() + " vs affinity " +
                     std::to_string(affinity.rows()) + "x" + std::to_string(affinity.cols()));
  double loss = 0.0;
  for (std::size_t i = 0; i < phi.rows(); ++i)
    for (std::size_t j = 0; j < phi.cols(); ++j) {
      const double p = phi(i, j);
      loss -= static_cast<double>(affinity(i, j)) * p - softplus(p);
    }
  return loss;
}

double quantization_loss(const DenseMatrix& codes, const DenseMatrix& vx, const DenseMatrix& vy) {
  require_same_shape(codes, vx, "quantization_loss");
  require_same_shape(codes, vy, "quantization_loss");
  double loss = 0.0;
  auto b = codes.values();
  auto x = vx.values();
  auto y = vy.values();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double dx = b[i] - x[i];
    const double dy = b[i] - y[i];
    loss += dx * dx + dy * dy;
  }
  return loss;
}

double balance_loss(const DenseMatrix& vx, const DenseMatrix& vy) {
  double loss = 0.0;
  for (double s : row_sums(vx)) loss += s * s;
  for (double s : row_sums(vy)) loss += s * s;
  return loss;
}

LossBreakdown objective(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                        const DenseMatrix& codes, double alpha, double beta) {
  require_code_space(vx, vy, affinity);
  LossBreakdown l;
  l.nll = nll_loss(pairwise_phi(vx, vy), affinity);
  l.quantization = quantization_loss(codes, vx, vy);
  l.balance = balance_loss(vx, vy);
  l.total = l.nll + alpha * l.quantization + beta * l.balance;
  return l;
}

DenseMatrix grad_vx_columns(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                            const DenseMatrix& codes, double alpha, double beta,
                            std::span<const std::size_t> columns) {
  require_code_space(vx, vy, affinity);
  return grad_columns(vx, vy, [&](std::size_t i, std::size_t j) { return affinity(i, j); }, codes, alpha,
                      beta, columns);
}

DenseMatrix grad_vy_columns(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                            const DenseMatrix& codes, double alpha, double beta,
                            std::span<const std::size_t> columns) {
  require_code_space(vx, vy, affinity);
  return grad_columns(vy, vx, [&](std::size_t j, std::size_t i) { return affinity(i, j); }, codes, alpha,
                      beta, columns);
}

DenseMatrix grad_vx(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                    const DenseMatrix& codes, double alpha, double beta) {
  const auto cols = all_columns(vx.cols());
  return grad_vx_columns(vx, vy, affinity, codes, alpha, beta, cols);
}

DenseMatrix grad_vy(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& affinity,
                    const DenseMatrix& codes, double alpha, double beta) {
  const auto cols = all_columns(vy.cols());
  return grad_vy_columns(vx, vy, affinity, codes, alpha, beta, cols);
}

DenseMatrix update_codes(const DenseMatrix& vx, const DenseMatrix& vy) {
  require_same_shape(vx, vy, "update_codes");
  DenseMatrix codes(vx.rows(), vx.cols());
  auto x = vx.values();
  auto y = vy.values();
  auto b = codes.values();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = (x[i] + y[i]) >= 0.0 ? 1.0 : -1.0;
  return codes;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(memory_lr_scale > 0.0) || !std::isfinite(memory_lr_scale))
    throw ConfigError("memory_lr_scale must be positive");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be non-negative");
  if (batch_columns == 0) throw ConfigError("batch_columns must be >= 1");
  if (code_length == 0) throw ConfigError("code_length must be >= 1");
  if (head_threshold == 0) throw ConfigError("head_threshold must be >= 1");
  if (!(eta.eta_max >= 0.0)) throw ConfigError("eta_max must be non-negative");
  for (std::size_t h : hidden_x)
    if (h == 0) throw ConfigError("hidden widths must be >= 1");
  for (std::size_t h : hidden_y)
    if (h == 0) throw ConfigError("hidden widths must be >= 1");
}

DenseMatrix encode_features(const HashModel& model, const DenseMatrix& features, Modality modality) {
  const auto& embedder = modality == Modality::image ? model.image : model.text;
  const auto& bank = modality == Modality::image ? model.image_bank : model.text_bank;
  return embed_batch(embedder, features, bank).meta;
}

namespace {

void require_finite(const DenseMatrix& m, const char* what, std::size_t epoch, std::size_t batch) {
  if (!all_finite(m)) {
    std::ostringstream msg;
    msg << "non-finite " << what << " at epoch " << epoch << ", batch " << batch;
    throw TrainingError(msg.str());
  }
}

void scatter_columns(DenseMatrix& dst, const DenseMatrix& src, std::span<const std::size_t> cols) {
  for (std::size_t r = 0; r < cols.size(); ++r)
    for (std::size_t t = 0; t < dst.rows(); ++t) dst(t, cols[r]) = src(t, r);
}

struct SideOptimizer {
  SgdOptimizer basic;
  SgdOptimizer weight;
  SgdOptimizer eta;

  explicit SideOptimizer(const TrainConfig& cfg)
      : basic(cfg.learning_rate, cfg.momentum),
        weight(cfg.learning_rate * cfg.memory_lr_scale, cfg.momentum),
        eta(cfg.learning_rate * cfg.memory_lr_scale, cfg.momentum) {}

  void step(MetaEmbedder& e, const EmbedderGrads& g) {
    basic.step(e.basic_net, g.basic);
    if (e.use_memory) {
      weight.step(e.weight_net, g.weight);
      if (e.eta_net) eta.step(*e.eta_net, g.eta);
    }
  }
};

}  // namespace

TrainResult train(const MultiModalDataset& data, std::span<const std::size_t> train_rows,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_rows.empty()) throw ConfigError("training split is empty");
  const MultiModalDataset train_set = subset(data, train_rows);
  train_set.validate();
  const std::size_t n = train_set.size();

  TrainResult result;
  HashModel& model = result.model;
  model.alpha = config.alpha;
  model.beta = config.beta;
  model.partition = split_head_tail(train_set.labels.class_counts(), config.head_threshold);

  EmbedderConfig side;
  side.code_length = config.code_length;
  side.num_classes = train_set.num_classes();
  side.hidden_activation = config.hidden_activation;
  side.eta = config.eta;
  side.weight_norm = config.weight_norm;
  side.use_memory = config.use_memory;

  side.input_dim = train_set.x.cols();
  side.hidden = config.hidden_x;
  model.image = MetaEmbedder::create(side, config.seed * 2 + 1);
  side.input_dim = train_set.y.cols();
  side.hidden = config.hidden_y;
  model.text = MetaEmbedder::create(side, config.seed * 2 + 2);

  const AffinityMatrix affinity = build_affinity(train_set.labels, train_set.labels);

  auto refresh_banks = [&] {
    model.image_bank = compute_prototypes(direct_features(model.image, train_set.x), train_set.labels,
                                          model.partition);
    model.text_bank = compute_prototypes(direct_features(model.text, train_set.y), train_set.labels,
                                         model.partition);
  };

  refresh_banks();
  DenseMatrix vx = encode_features(model, train_set.x, Modality::image);
  DenseMatrix vy = encode_features(model, train_set.y, Modality::text);
  require_finite(vx, "image features", 0, 0);
  require_finite(vy, "text features", 0, 0);
  model.codes = update_codes(vx, vy);
  result.initial = objective(vx, vy, affinity, model.codes, config.alpha, config.beta);

  SideOptimizer image_opt(config);
  SideOptimizer text_opt(config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    refresh_banks();
    vx = encode_features(model, train_set.x, Modality::image);
    vy = encode_features(model, train_set.y, Modality::text);

    for (Modality side_mod : {Modality::image, Modality::text}) {
      const bool image_side = side_mod == Modality::image;
      MetaEmbedder& embedder = image_side ? model.image : model.text;
      const PrototypeBank& bank = image_side ? model.image_bank : model.text_bank;
      const DenseMatrix& inputs = image_side ? train_set.x : train_set.y;
      DenseMatrix& own = image_side ? vx : vy;
      SideOptimizer& opt = image_side ? image_opt : text_opt;

      std::shuffle(order.begin(), order.end(), rng);
      std::size_t batch_index = 0;
      for (std::size_t start = 0; start < n; start += config.batch_columns, ++batch_index) {
        std::span<const std::size_t> cols(order.data() + start, std::min(config.batch_columns, n - start));
        auto emb = embed_batch(embedder, gather_rows(inputs, cols), bank);
        require_finite(emb.meta, "meta features", epoch, batch_index);
        scatter_columns(own, emb.meta, cols);
        DenseMatrix grad = image_side
                               ? grad_vx_columns(vx, vy, affinity, model.codes, config.alpha, config.beta, cols)
                               : grad_vy_columns(vx, vy, affinity, model.codes, config.alpha, config.beta, cols);
        require_finite(grad, "feature gradient", epoch, batch_index);
        auto grads = embed_backward(embedder, emb.cache, grad, bank);
        try {
          opt.step(embedder, grads);
        } catch (const TrainingError& e) {
          std::ostringstream msg;
          msg << e.what() << " at epoch " << epoch << ", batch " << batch_index;
          throw TrainingError(msg.str());
        }
      }
    }

    vx = encode_features(model, train_set.x, Modality::image);
    vy = encode_features(model, train_set.y, Modality::text);
    require_finite(vx, "image features", epoch, 0);
    require_finite(vy, "text features", epoch, 0);
    EpochRecord record;
    record.epoch = epoch;
    record.total_before_code_update = objective(vx, vy, affinity, model.codes, config.alpha, config.beta).total;
    model.codes = update_codes(vx, vy);
    record.loss = objective(vx, vy, affinity, model.codes, config.alpha, config.beta);
    if (!std::isfinite(record.loss.total)) {
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(record);
    if (on_epoch && !on_epoch(record)) break;
  }
  return result;
}

std::string loss_history_csv(std::span<const EpochRecord> history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,nll,quantization,balance,total\n";
  for (const auto& r : history)
    out << r.epoch << ',' << r.loss.nll << ',' << r.loss.quantization << ',' << r.loss.balance << ','
        << r.loss.total << '\n';
  return out.str();
}

}  // namespace lcmh
