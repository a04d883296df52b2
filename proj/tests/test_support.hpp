#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lcmh/dataset.hpp"
#include "lcmh/matrix.hpp"

namespace lcmh::testing {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                 double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

inline DenseMatrix random_signs(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = coin(rng) ? 1.0 : -1.0;
  return m;
}

/// Every row gets at least one label.
inline LabelMatrix random_labels(std::size_t rows, std::size_t classes, std::mt19937_64& rng, double p = 0.3) {
  std::bernoulli_distribution coin(p);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  LabelMatrix l(rows, classes);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < classes; ++c)
      if (coin(rng)) l.set(r, c);
    if (l.row_count(r) == 0) l.set(r, pick(rng));
  }
  return l;
}

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

}  // namespace lcmh::testing
