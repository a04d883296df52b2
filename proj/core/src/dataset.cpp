#include "lcmh/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lcmh/binary_io.hpp"
#include "lcmh/errors.hpp"

namespace lcmh {

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
}

LabelMatrix::LabelMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

std::vector<std::size_t> LabelMatrix::labels_of(std::size_t r) const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < cols_; ++c)
    if ((*this)(r, c)) out.push_back(c);
  return out;
}

std::size_t LabelMatrix::row_count(std::size_t r) const noexcept {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cols_; ++c) n += bits_[r * cols_ + c];
  return n;
}

std::vector<std::size_t> LabelMatrix::class_counts() const {
  std::vector<std::size_t> counts(cols_, 0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) counts[c] += bits_[r * cols_ + c];
  return counts;
}

bool LabelMatrix::shares_label(std::size_t a, const LabelMatrix& other, std::size_t b) const noexcept {
  const std::uint8_t* ra = bits_.data() + a * cols_;
  const std::uint8_t* rb = other.bits_.data() + b * other.cols_;
  for (std::size_t c = 0; c < cols_; ++c)
    if (ra[c] & rb[c]) return true;
  return false;
}

LabelMatrix gather_rows(const LabelMatrix& labels, std::span<const std::size_t> rows) {
  LabelMatrix out(rows.size(), labels.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= labels.rows()) throw ShapeError("gather_rows: label row out of range");
    for (std::size_t c = 0; c < labels.cols(); ++c)
      if (labels(rows[i], c)) out.set(i, c);
  }
  return out;
}

void MultiModalDataset::validate() const {
  const std::size_t n = labels.rows();
  if (x.rows() != n || y.rows() != n)
    throw ConfigError("dataset row counts disagree: X " + x.shape_string() + ", Y " +
                      y.shape_string() + ", labels " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (labels.row_count(i) == 0) throw ConfigError("sample " + std::to_string(i) + " has no label");
  if (!class_names.empty() && class_names.size() != labels.cols())
    throw ConfigError("class name count does not match label width");
}

MultiModalDataset subset(const MultiModalDataset& data, std::span<const std::size_t> rows) {
  return {gather_rows(data.x, rows), gather_rows(data.y, rows), gather_rows(data.labels, rows),
          data.class_names};
}

std::size_t LongTailSpec::num_classes() const noexcept {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.num_classes;
  return n;
}

std::vector<std::size_t> LongTailSpec::train_counts() const {
  std::vector<std::size_t> counts;
  for (const auto& g : groups) counts.insert(counts.end(), g.num_classes, g.samples_per_class);
  return counts;
}

void LongTailSpec::validate() const {
  if (groups.empty()) throw ConfigError("long-tail spec has no class groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].num_classes == 0 || groups[i].samples_per_class == 0)
      throw ConfigError("class group " + std::to_string(i) + " has a zero count");
    if (i > 0 && groups[i].samples_per_class > groups[i - 1].samples_per_class)
      throw ConfigError("class groups must be sorted by non-increasing samples_per_class");
  }
  if (d_x == 0 || d_y == 0 || latent_dim == 0) throw ConfigError("feature dimensions must be >= 1");
  if (!(multi_label_fraction >= 0.0 && multi_label_fraction <= 1.0))
    throw ConfigError("multi_label_fraction must lie in [0, 1]");
  if (!(latent_noise >= 0.0) || !(feature_noise >= 0.0) || !(center_scale > 0.0))
    throw ConfigError("noise levels must be >= 0 and center_scale > 0");
  if (multi_label_fraction > 0.0 && num_classes() < 2)
    throw ConfigError("multi-label samples need at least two classes");
}

LongTailSpec LongTailSpec::flickr_shaped() {
  LongTailSpec s;
  s.groups = {{4, 2000}, {10, 200}, {10, 50}};
  return s;
}

LongTailSpec LongTailSpec::nus_wide_shaped() {
  LongTailSpec s;
  s.groups = {{9, 1000}, {35, 100}, {35, 25}};
  return s;
}

std::vector<ClassGroup> parse_groups(std::string_view text) {
  std::vector<ClassGroup> groups;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    const std::size_t x = item.find('x');
    ClassGroup g{};
    auto parse = [&](std::string_view s, std::size_t& out) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
    };
    if (x == std::string_view::npos || !parse(item.substr(0, x), g.num_classes) ||
        !parse(item.substr(x + 1), g.samples_per_class))
      throw ConfigError("bad class group '" + std::string(item) + "', expected <classes>x<samples>");
    groups.push_back(g);
    start = end + 1;
  }
  return groups;
}

std::string format_groups(std::span<const ClassGroup> groups) {
  std::string out;
  for (const auto& g : groups) {
    if (!out.empty()) out += ',';
    out += std::to_string(g.num_classes) + "x" + std::to_string(g.samples_per_class);
  }
  return out;
}

MultiModalDataset synthesize_long_tailed(const LongTailSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t classes = spec.num_classes();
  const std::size_t r = spec.latent_dim;
  DenseMatrix centers(classes, r);
  for (double& v : centers.values()) v = spec.center_scale * normal(rng);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(r));
  DenseMatrix map_x(spec.d_x, r), map_y(spec.d_y, r);
  for (double& v : map_x.values()) v = map_scale * normal(rng);
  for (double& v : map_y.values()) v = map_scale * normal(rng);

  const auto budget = spec.train_counts();
  std::vector<std::size_t> primary;
  for (std::size_t k = 0; k < classes; ++k) primary.insert(primary.end(), budget[k] + spec.holdout_per_class, k);
  std::shuffle(primary.begin(), primary.end(), rng);

  const std::size_t n = primary.size();
  MultiModalDataset data{DenseMatrix(n, spec.d_x), DenseMatrix(n, spec.d_y), LabelMatrix(n, classes), {}};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> other_class(0, classes > 1 ? classes - 2 : 0);
  std::vector<double> latent(r);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = primary[i];
    data.labels.set(i, k);
    auto ck = centers.row(k);
    std::copy(ck.begin(), ck.end(), latent.begin());
    if (spec.multi_label_fraction > 0.0 && unit(rng) < spec.multi_label_fraction) {
      std::size_t j = other_class(rng);
      if (j >= k) ++j;
      data.labels.set(i, j);
      auto cj = centers.row(j);
      for (std::size_t t = 0; t < r; ++t) latent[t] = 0.5 * (latent[t] + cj[t]);
    }
    for (double& v : latent) v += spec.latent_noise * normal(rng);
    for (std::size_t d = 0; d < spec.d_x; ++d) {
      double acc = 0.0;
      for (std::size_t t = 0; t < r; ++t) acc += map_x(d, t) * latent[t];
      data.x(i, d) = acc + spec.feature_noise * normal(rng);
    }
    for (std::size_t d = 0; d < spec.d_y; ++d) {
      double acc = 0.0;
      for (std::size_t t = 0; t < r; ++t) acc += map_y(d, t) * latent[t];
      data.y(i, d) = acc + spec.feature_noise * normal(rng);
    }
  }
  return data;
}

LabelMatrix trim_labels(const LabelMatrix& labels, std::size_t min_keep, std::size_t max_keep,
                        std::uint64_t seed) {
  if (min_keep == 0 || min_keep > max_keep)
    throw ConfigError("trim_labels: need 1 <= min_keep <= max_keep");
  const auto counts = labels.class_counts();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> keep_dist(min_keep, max_keep);
  LabelMatrix out = labels;
  for (std::size_t r = 0; r < labels.rows(); ++r) {
    auto present = labels.labels_of(r);
    if (present.size() <= max_keep) continue;
    const std::size_t keep = keep_dist(rng);
    std::stable_sort(present.begin(), present.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
    for (std::size_t i = keep; i < present.size(); ++i) out.set(r, present[i], false);
  }
  return out;
}

AffinityMatrix build_affinity(const LabelMatrix& a, const LabelMatrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("build_affinity: label widths " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  AffinityMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out.set(i, j, a.shares_label(i, b, j));
  return out;
}

std::size_t HeadTailPartition::head_count() const noexcept {
  return static_cast<std::size_t>(std::count(is_head.begin(), is_head.end(), true));
}

HeadTailPartition split_head_tail(std::span<const std::size_t> class_counts, std::size_t threshold) {
  if (threshold == 0) throw ConfigError("head threshold must be >= 1");
  HeadTailPartition p;
  p.threshold = threshold;
  p.counts.assign(class_counts.begin(), class_counts.end());
  for (std::size_t c : class_counts) p.is_head.push_back(c >= threshold);
  return p;
}

DataSplit split_query_retrieval(const MultiModalDataset& data, const SplitSpec& spec,
                                std::uint64_t seed) {
  const std::size_t n = data.size();
  const std::size_t classes = data.num_classes();
  if (spec.train_per_class.size() != classes)
    throw ConfigError("split: training budget lists " + std::to_string(spec.train_per_class.size()) +
                      " classes, dataset has " + std::to_string(classes));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  enum : std::uint8_t { kFree, kTrain, kQuery };
  std::vector<std::uint8_t> role(n, kFree);

  // Rarest budgets first so tail labels are kept.
  std::vector<std::size_t> class_order(classes);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::stable_sort(class_order.begin(), class_order.end(), [&](std::size_t a, std::size_t b) {
    return spec.train_per_class[a] < spec.train_per_class[b];
  });
  std::vector<std::size_t> in_train(classes, 0);
  for (std::size_t k : class_order) {
    for (std::size_t s : order) {
      if (in_train[k] >= spec.train_per_class[k]) break;
      if (role[s] != kFree || !data.labels(s, k)) continue;
      role[s] = kTrain;
      for (std::size_t c : data.labels.labels_of(s)) ++in_train[c];
    }
  }

  if (spec.queries_per_class > 0) {
    for (std::size_t k = 0; k < classes; ++k) {
      std::size_t taken = 0;
      bool any_outside = false;
      for (std::size_t s : order) {
        if (taken >= spec.queries_per_class) break;
        if (!data.labels(s, k) || role[s] == kTrain) continue;
        any_outside = true;
        if (role[s] != kFree) continue;
        role[s] = kQuery;
        ++taken;
      }
      if (!any_outside)
        throw ConfigError("class " + std::to_string(k) + " has no samples outside the training set");
    }
  }

  DataSplit split;
  for (std::size_t s = 0; s < n; ++s) {
    if (role[s] == kTrain) split.train.push_back(s);
    if (role[s] == kQuery) split.query.push_back(s);
    if (role[s] == kFree || (role[s] == kQuery && spec.retrieval_includes_queries))
      split.retrieval.push_back(s);
  }
  return split;
}

std::vector<std::uint8_t> encode_dataset(const MultiModalDataset& data) {
  data.validate();
  ByteWriter w;
  w.magic("LCMD");
  w.u32(kDatasetVersion);
  w.u64(data.size());
  w.u64(data.x.cols());
  w.u64(data.y.cols());
  w.u64(data.num_classes());
  w.f64s(data.x.values());
  w.f64s(data.y.values());
  const std::size_t bits = data.size() * data.num_classes();
  std::vector<std::uint8_t> packed((bits + 7) / 8, 0);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t c = 0; c < data.num_classes(); ++c)
      if (data.labels(i, c)) {
        const std::size_t k = i * data.num_classes() + c;
        packed[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
      }
  w.raw(packed);
  if (!data.class_names.empty()) {
    w.u64(data.class_names.size());
    for (const auto& name : data.class_names) {
      w.u64(name.size());
      w.raw({reinterpret_cast<const std::uint8_t*>(name.data()), name.size()});
    }
  }
  return w.bytes();
}

MultiModalDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("LCMD");
  r.expect_version(kDatasetVersion);
  const std::size_t header_end = r.offset() + 32;
  const std::uint64_t n = r.u64(), dx = r.u64(), dy = r.u64(), classes = r.u64();
  const std::uint64_t floats = n * (dx + dy);
  if ((dx + dy) != 0 && floats / (dx + dy) != n)
    throw FormatError("dataset dimensions overflow", header_end);
  if (floats > r.remaining() / 8) throw FormatError("truncated feature block", r.offset());

  MultiModalDataset data{DenseMatrix(n, dx), DenseMatrix(n, dy), LabelMatrix(n, classes), {}};
  for (double& v : data.x.values()) v = r.f64();
  for (double& v : data.y.values()) v = r.f64();
  const std::size_t bits = n * classes;
  auto packed = r.raw((bits + 7) / 8);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t k = i * classes + c;
      if (packed[k / 8] & (1u << (k % 8))) data.labels.set(i, c);
    }
  if (!r.at_end()) {
    const std::uint64_t names = r.count(8, "class name count");
    for (std::uint64_t i = 0; i < names; ++i) {
      const std::uint64_t len = r.count(1, "class name length");
      auto chars = r.raw(len);
      data.class_names.emplace_back(chars.begin(), chars.end());
    }
    if (!r.at_end()) throw FormatError("trailing bytes after dataset", r.offset());
  }
  try {
    data.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid dataset contents: ") + e.what(), r.offset());
  }
  return data;
}

void save_dataset(const MultiModalDataset& data, const std::filesystem::path& path) {
  write_file_bytes(path, encode_dataset(data));
}

MultiModalDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file_bytes(path));
}

namespace {

std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'", 0);
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": ragged row", 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

DenseMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  DenseMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

}  // namespace

MultiModalDataset import_csv(const std::filesystem::path& x_path, const std::filesystem::path& y_path,
                             const std::filesystem::path& labels_path, std::size_t num_classes) {
  MultiModalDataset data;
  data.x = to_matrix(read_numeric_rows(x_path));
  data.y = to_matrix(read_numeric_rows(y_path));

  std::ifstream in(labels_path);
  if (!in) throw IoError("cannot open '" + labels_path.string() + "'");
  std::vector<std::vector<std::size_t>> rows;
  std::size_t max_class = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::size_t> row;
    std::istringstream fields(line);
    std::string tok;
    while (std::getline(fields, tok, ';')) {
      tok.erase(std::remove_if(tok.begin(), tok.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); }),
                tok.end());
      if (tok.empty()) continue;
      std::size_t c = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), c);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw FormatError(labels_path.string() + ": bad class index '" + tok + "'", 0);
      row.push_back(c);
      max_class = std::max(max_class, c);
    }
    rows.push_back(std::move(row));
  }
  const std::size_t classes = num_classes > 0 ? num_classes : max_class + 1;
  if (!rows.empty() && max_class >= classes)
    throw ConfigError("class index " + std::to_string(max_class) + " exceeds declared class count");
  data.labels = LabelMatrix(rows.size(), classes);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c : rows[i]) data.labels.set(i, c);
  data.validate();
  return data;
}

}  // namespace lcmh
