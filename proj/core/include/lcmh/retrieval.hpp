#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcmh/dataset.hpp"
#include "lcmh/matrix.hpp"

namespace lcmh {

/// Bit-packed codes, one row per sample. Bit b of a row is set iff the code value at
/// position b is +1; bit b lives in word b / 64 at position b % 64. Pad bits stay zero.
class BinaryCodeMatrix {
 public:
  BinaryCodeMatrix() = default;
  BinaryCodeMatrix(std::size_t rows, std::size_t bits);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t bits() const noexcept { return bits_; }
  std::size_t words_per_row() const noexcept { return words_; }

  std::span<const std::uint64_t> row(std::size_t r) const noexcept { return {data_.data() + r * words_, words_}; }
  bool bit(std::size_t r, std::size_t b) const noexcept { return (data_[r * words_ + b / 64] >> (b % 64)) & 1u; }
  void set_bit(std::size_t r, std::size_t b, bool on) noexcept;
  std::span<const std::uint64_t> words() const noexcept { return data_; }

  friend bool operator==(const BinaryCodeMatrix&, const BinaryCodeMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> data_;
};

/// V is c x n; row i of the result is the code of column i (bit set iff V >= 0).
BinaryCodeMatrix binarize(const DenseMatrix& v);

/// Popcount Hamming distance between two packed rows of equal width.
std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

/// Database indices by ascending Hamming distance, ties by ascending index.
std::vector<std::size_t> rank_by_hamming(std::span<const std::uint64_t> query, const BinaryCodeMatrix& db);

/// Mean over relevant positions r (1-based) of precision@r; 0 when nothing is relevant.
double average_precision(std::span<const std::uint8_t> ranked_relevance);

enum class Direction { image_to_text, text_to_image };

/// "I2T" / "T2I"
std::string_view to_string(Direction d) noexcept;
Direction direction_from_string(std::string_view s);

struct GroupScore {
  double map = 0.0;
  std::size_t num_queries = 0;
};

struct RetrievalResult {
  Direction direction = Direction::image_to_text;
  std::size_t code_bits = 0;
  std::vector<double> average_precisions;  // per query
  std::vector<bool> query_is_tail;
  GroupScore all;
  GroupScore head;
  GroupScore tail;
};

/// A database item is relevant iff it shares a label with the query. A query is in the
/// tail group if any of its labels is a tail class. Throws EvaluationError on an empty
/// query set.
RetrievalResult evaluate(const BinaryCodeMatrix& queries, const LabelMatrix& query_labels,
                         const BinaryCodeMatrix& db, const LabelMatrix& db_labels,
                         const HeadTailPartition& partition, Direction direction);

/// direction,group,code_bits,map,num_queries
std::string result_csv(std::span<const RetrievalResult> results);

/// "LCMB" layout: magic, u32 version, u64 n, u64 c, then n rows of ceil(c/64) u64 words.
std::vector<std::uint8_t> encode_codes(const BinaryCodeMatrix& codes);
BinaryCodeMatrix decode_codes(std::span<const std::uint8_t> bytes);
void save_codes(const BinaryCodeMatrix& codes, const std::filesystem::path& path);
BinaryCodeMatrix load_codes(const std::filesystem::path& path);

}  // namespace lcmh
