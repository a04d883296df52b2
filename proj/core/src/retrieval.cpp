#include "lcmh/retrieval.hpp"

#include <bit>
#include <numeric>
#include <sstream>

#include "lcmh/binary_io.hpp"
#include "lcmh/errors.hpp"

namespace lcmh {

namespace {
constexpr std::uint32_t kCodesVersion = 1;
}

BinaryCodeMatrix::BinaryCodeMatrix(std::size_t rows, std::size_t bits)
    : rows_(rows), bits_(bits), words_((bits + 63) / 64), data_(rows * words_, 0) {}

void BinaryCodeMatrix::set_bit(std::size_t r, std::size_t b, bool on) noexcept {
  const std::uint64_t mask = std::uint64_t{1} << (b % 64);
  auto& word = data_[r * words_ + b / 64];
  word = on ? (word | mask) : (word & ~mask);
}

BinaryCodeMatrix binarize(const DenseMatrix& v) {
  BinaryCodeMatrix codes(v.cols(), v.rows());
  for (std::size_t b = 0; b < v.rows(); ++b) {
    auto row = v.row(b);
    for (std::size_t i = 0; i < v.cols(); ++i)
      if (row[i] >= 0.0) codes.set_bit(i, b, true);
  }
  return codes;
}

std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size())
    throw ShapeError("hamming: code widths " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                     " words");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
  return d;
}

std::vector<std::size_t> rank_by_hamming(std::span<const std::uint64_t> query, const BinaryCodeMatrix& db) {
  if (query.size() != db.words_per_row())
    throw ShapeError("rank_by_hamming: query has " + std::to_string(query.size()) + " words, database " +
                     std::to_string(db.words_per_row()));
  // Counting sort on distance keeps equal distances in index order.
  std::vector<std::size_t> distance(db.rows());
  std::vector<std::size_t> bucket(db.bits() + 2, 0);
  for (std::size_t i = 0; i < db.rows(); ++i) {
    distance[i] = hamming(query, db.row(i));
    ++bucket[distance[i] + 1];
  }
  std::partial_sum(bucket.begin(), bucket.end(), bucket.begin());
  std::vector<std::size_t> ranked(db.rows());
  for (std::size_t i = 0; i < db.rows(); ++i) ranked[bucket[distance[i]]++] = i;
  return ranked;
}

double average_precision(std::span<const std::uint8_t> ranked_relevance) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked_relevance.size(); ++r) {
    if (!ranked_relevance[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

std::string_view to_string(Direction d) noexcept { return d == Direction::image_to_text ? "I2T" : "T2I"; }

Direction direction_from_string(std::string_view s) {
  if (s == "I2T" || s == "i2t") return Direction::image_to_text;
  if (s == "T2I" || s == "t2i") return Direction::text_to_image;
  throw ConfigError("unknown direction '" + std::string(s) + "', expected I2T or T2I");
}

RetrievalResult evaluate(const BinaryCodeMatrix& queries, const LabelMatrix& query_labels,
                         const BinaryCodeMatrix& db, const LabelMatrix& db_labels,
                         const HeadTailPartition& partition, Direction direction) {
  if (queries.rows() == 0) throw EvaluationError("evaluate: empty query set");
  if (queries.bits() != db.bits())
    throw ShapeError("evaluate: query codes have " + std::to_string(queries.bits()) + " bits, database " +
                     std::to_string(db.bits()));
  if (query_labels.rows() != queries.rows() || db_labels.rows() != db.rows())
    throw ShapeError("evaluate: label rows do not match code rows");
  if (query_labels.cols() != db_labels.cols() || partition.num_classes() != query_labels.cols())
    throw ShapeError("evaluate: inconsistent label widths");

  RetrievalResult result;
  result.direction = direction;
  result.code_bits = queries.bits();
  result.average_precisions.resize(queries.rows());
  result.query_is_tail.resize(queries.rows());
  std::vector<std::uint8_t> relevance(db.rows());
  double sum_all = 0.0, sum_head = 0.0, sum_tail = 0.0;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    const auto ranked = rank_by_hamming(queries.row(q), db);
    for (std::size_t r = 0; r < ranked.size(); ++r)
      relevance[r] = query_labels.shares_label(q, db_labels, ranked[r]) ? 1 : 0;
    const double ap = average_precision(relevance);
    bool tail = false;
    for (std::size_t k : query_labels.labels_of(q)) tail = tail || !partition.is_head[k];
    result.average_precisions[q] = ap;
    result.query_is_tail[q] = tail;
    sum_all += ap;
    if (tail) {
      sum_tail += ap;
      ++result.tail.num_queries;
    } else {
      sum_head += ap;
      ++result.head.num_queries;
    }
  }
  result.all.num_queries = queries.rows();
  result.all.map = sum_all / static_cast<double>(queries.rows());
  if (result.head.num_queries) result.head.map = sum_head / static_cast<double>(result.head.num_queries);
  if (result.tail.num_queries) result.tail.map = sum_tail / static_cast<double>(result.tail.num_queries);
  return result;
}

std::string result_csv(std::span<const RetrievalResult> results) {
  std::ostringstream out;
  out.precision(17);
  out << "direction,group,code_bits,map,num_queries\n";
  for (const auto& r : results) {
    const std::pair<const char*, const GroupScore*> groups[] = {{"all", &r.all}, {"head", &r.head}, {"tail", &r.tail}};
    for (const auto& [name, score] : groups)
      out << to_string(r.direction) << ',' << name << ',' << r.code_bits << ',' << score->map << ','
          << score->num_queries << '\n';
  }
  return out.str();
}

std::vector<std::uint8_t> encode_codes(const BinaryCodeMatrix& codes) {
  ByteWriter w;
  w.magic("LCMB");
  w.u32(kCodesVersion);
  w.u64(codes.rows());
  w.u64(codes.bits());
  for (std::uint64_t word : codes.words()) w.u64(word);
  return w.bytes();
}

BinaryCodeMatrix decode_codes(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("LCMB");
  r.expect_version(kCodesVersion);
  const std::uint64_t n = r.u64();
  const std::size_t bits_at = r.offset();
  const std::uint64_t bits = r.u64();
  if (bits == 0) throw FormatError("code length must be >= 1", bits_at);
  const std::uint64_t words = (bits + 63) / 64;
  if (words != 0 && n > r.remaining() / 8 / words) throw FormatError("truncated code rows", r.offset());
  BinaryCodeMatrix codes(n, bits);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t w = 0; w < words; ++w) {
      const std::size_t at = r.offset();
      const std::uint64_t word = r.u64();
      for (std::size_t b = 0; b < 64; ++b) {
        const std::size_t bit = w * 64 + b;
        const bool on = (word >> b) & 1u;
        if (bit >= bits) {
          if (on) throw FormatError("non-zero pad bit in code row " + std::to_string(i), at);
          continue;
        }
        if (on) codes.set_bit(i, bit, true);
      }
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes after code rows", r.offset());
  return codes;
}

void save_codes(const BinaryCodeMatrix& codes, const std::filesystem::path& path) {
  write_file_bytes(path, encode_codes(codes));
}

BinaryCodeMatrix load_codes(const std::filesystem::path& path) { return decode_codes(read_file_bytes(path)); }

}  // namespace lcmh
