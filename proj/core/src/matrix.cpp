#include "lcmh/matrix.hpp"

#include <cmath>

#include "lcmh/errors.hpp"

namespace lcmh {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("DenseMatrix: " + std::to_string(values_.size()) +
                     " values do not fill a " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " matrix");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string DenseMatrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + a.shape_string() + " * " + b.shape_string());
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: (" + a.shape_string() + ")^T * " + b.shape_string());
  // Row-at-a-time over a^T keeps each output row hot in cache.
  return matmul(transpose(a), b);
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + a.shape_string() + " * (" + b.shape_string() + ")^T");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto b_row = b.row(j);
      // four independent partial sums; fixed order keeps results deterministic
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t k = 0;
      for (; k + 4 <= a.cols(); k += 4) {
        acc[0] += a_row[k] * b_row[k];
        acc[1] += a_row[k + 1] * b_row[k + 1];
        acc[2] += a_row[k + 2] * b_row[k + 2];
        acc[3] += a_row[k + 3] * b_row[k + 3];
      }
      for (; k < a.cols(); ++k) acc[0] += a_row[k] * b_row[k];
      out(i, j) = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }
  }
  return out;
}

DenseMatrix gather_columns(const DenseMatrix& m, std::span<const std::size_t> cols) {
  DenseMatrix out(m.rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= m.cols())
      throw ShapeError("gather_columns: column " + std::to_string(cols[j]) + " out of range for " +
                       m.shape_string());
    for (std::size_t r = 0; r < m.rows(); ++r) out(r, j) = m(r, cols[j]);
  }
  return out;
}

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       m.shape_string());
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* context) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(context) + ": shape " + a.shape_string() + " vs " +
                     b.shape_string());
}

bool all_finite(const DenseMatrix& m) noexcept {
  for (double v : m.values())
    if (!std::isfinite(v)) return false;
  return true;
}

double squared_frobenius(const DenseMatrix& m) noexcept {
  double acc = 0.0;
  for (double v : m.values()) acc += v * v;
  return acc;
}

std::vector<double> row_sums(const DenseMatrix& m) {
  std::vector<double> sums(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double v : m.row(r)) sums[r] += v;
  return sums;
}

}  // namespace lcmh
