#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lcmh {

/// Row-major dense matrix of doubles.
///
/// Used for sample batches (samples x features), network parameters
/// (outputs x inputs) and code-space feature matrices (code bits x samples).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `values`; throws ShapeError unless values.size() == rows * cols.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::string shape_string() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

DenseMatrix transpose(const DenseMatrix& m);

/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

/// Selects columns `cols` of m, in order.
DenseMatrix gather_columns(const DenseMatrix& m, std::span<const std::size_t> cols);
/// Selects rows `rows` of m, in order.
DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows);

/// Throws ShapeError naming both shapes unless a and b have identical dimensions.
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* context);

bool all_finite(const DenseMatrix& m) noexcept;
double squared_frobenius(const DenseMatrix& m) noexcept;
/// Row sums, i.e. m * 1.
std::vector<double> row_sums(const DenseMatrix& m);

}  // namespace lcmh
