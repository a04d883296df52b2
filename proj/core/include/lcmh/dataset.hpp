#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcmh/matrix.hpp"

namespace lcmh {

/// Dense binary n x L label matrix (multi-hot rows).
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  bool operator()(std::size_t r, std::size_t c) const noexcept { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool on = true) noexcept { bits_[r * cols_ + c] = on ? 1 : 0; }

  /// Class indices set in row r, ascending.
  std::vector<std::size_t> labels_of(std::size_t r) const;
  std::size_t row_count(std::size_t r) const noexcept;
  /// Per-class number of rows carrying the class.
  std::vector<std::size_t> class_counts() const;
  /// True when rows a (of this) and b (of other) share at least one class.
  bool shares_label(std::size_t a, const LabelMatrix& other, std::size_t b) const noexcept;

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

LabelMatrix gather_rows(const LabelMatrix& labels, std::span<const std::size_t> rows);

/// Paired image/text samples with shared multi-hot labels.
struct MultiModalDataset {
  DenseMatrix x;  // n x d_x image-side features
  DenseMatrix y;  // n x d_y text-side features
  LabelMatrix labels;
  std::vector<std::string> class_names;  // empty or one per class

  std::size_t size() const noexcept { return labels.rows(); }
  std::size_t num_classes() const noexcept { return labels.cols(); }
  /// Throws ConfigError on inconsistent row counts or unlabeled samples.
  void validate() const;

  friend bool operator==(const MultiModalDataset&, const MultiModalDataset&) = default;
};

MultiModalDataset subset(const MultiModalDataset& data, std::span<const std::size_t> rows);

struct ClassGroup {
  std::size_t num_classes = 1;
  std::size_t samples_per_class = 1;

  friend bool operator==(const ClassGroup&, const ClassGroup&) = default;
};

/// Shape of a synthetic long-tailed dataset.
///
/// Every class k owns a latent center; paired samples are noisy images of that
/// center through two fixed random linear maps, so both modalities share class
/// structure. `samples_per_class` is the training budget of the class;
/// `holdout_per_class` extra samples per class feed the query/retrieval pools.
struct LongTailSpec {
  std::vector<ClassGroup> groups;
  std::size_t d_x = 64;
  std::size_t d_y = 48;
  std::size_t latent_dim = 16;
  std::size_t holdout_per_class = 0;
  double center_scale = 1.0;
  double latent_noise = 0.5;
  double feature_noise = 0.5;
  /// Fraction of samples that mix two class latents and carry both labels.
  double multi_label_fraction = 0.0;

  std::size_t num_classes() const noexcept;
  /// Training budget per class, class-index order.
  std::vector<std::size_t> train_counts() const;
  /// Throws ConfigError unless groups are non-empty, counts >= 1 and sorted by
  /// non-increasing samples_per_class.
  void validate() const;

  /// 4 x 2000, 10 x 200, 10 x 50
  static LongTailSpec flickr_shaped();
  /// 9 x 1000, 35 x 100, 35 x 25
  static LongTailSpec nus_wide_shaped();
};

/// Parses "4x2000,10x200,10x50". Throws ConfigError.
std::vector<ClassGroup> parse_groups(std::string_view text);
std::string format_groups(std::span<const ClassGroup> groups);

MultiModalDataset synthesize_long_tailed(const LongTailSpec& spec, std::uint64_t seed);

/// Rows with more than `max_keep` labels keep a uniformly drawn number in
/// [min_keep, max_keep] of their globally rarest labels (ties by class index).
LabelMatrix trim_labels(const LabelMatrix& labels, std::size_t min_keep = 2,
                        std::size_t max_keep = 3, std::uint64_t seed = 0);

/// a_ij = 1 iff row i of one side shares at least one label with row j of the other.
class AffinityMatrix {
 public:
  AffinityMatrix() = default;
  AffinityMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint8_t operator()(std::size_t i, std::size_t j) const noexcept { return bits_[i * cols_ + j]; }
  void set(std::size_t i, std::size_t j, bool on) noexcept { bits_[i * cols_ + j] = on ? 1 : 0; }
  std::span<const std::uint8_t> row(std::size_t i) const noexcept { return {bits_.data() + i * cols_, cols_}; }

  friend bool operator==(const AffinityMatrix&, const AffinityMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

AffinityMatrix build_affinity(const LabelMatrix& a, const LabelMatrix& b);

struct HeadTailPartition {
  std::vector<bool> is_head;
  std::vector<std::size_t> counts;
  std::size_t threshold = 1;

  std::size_t num_classes() const noexcept { return is_head.size(); }
  std::size_t head_count() const noexcept;
  std::size_t tail_count() const noexcept { return num_classes() - head_count(); }

  friend bool operator==(const HeadTailPartition&, const HeadTailPartition&) = default;
};

/// Class k is head iff class_counts[k] >= threshold (threshold >= 1).
HeadTailPartition split_head_tail(std::span<const std::size_t> class_counts, std::size_t threshold);

struct SplitSpec {
  /// Training budget per class; rarest classes are filled first.
  std::vector<std::size_t> train_per_class;
  std::size_t queries_per_class = 50;
  /// When set the retrieval set also contains the queries.
  bool retrieval_includes_queries = false;
};

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> query;
  std::vector<std::size_t> retrieval;
};

/// Training set per the per-class budget, then up to queries_per_class queries per class
/// drawn from outside the training set, the rest forming the retrieval set. All index
/// lists are ascending. Throws ConfigError when a class has no non-training samples
/// while queries are requested.
DataSplit split_query_retrieval(const MultiModalDataset& data, const SplitSpec& spec,
                                std::uint64_t seed);

/// Binary "LCMD" layout: magic, u32 version, u64 n, d_x, d_y, L, X and Y as row-major f64,
/// labels as n*L bits packed LSB-first, then an optional class-name trailer.
void save_dataset(const MultiModalDataset& data, const std::filesystem::path& path);
MultiModalDataset load_dataset(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_dataset(const MultiModalDataset& data);
MultiModalDataset decode_dataset(std::span<const std::uint8_t> bytes);

/// Modality files hold one sample per line (comma or whitespace separated); the label
/// file holds semicolon-separated class indices per line. num_classes == 0 infers L.
MultiModalDataset import_csv(const std::filesystem::path& x_path, const std::filesystem::path& y_path,
                             const std::filesystem::path& labels_path, std::size_t num_classes = 0);

}  // namespace lcmh
