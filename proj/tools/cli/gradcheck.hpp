#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lcmh::cli {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t instances = 50;
  double eps = 1e-6;
  double alpha = 1.0;
  double beta = 1.0;
  /// Test hook: scales every analytic gradient by 1.01 before comparison.
  bool corrupt = false;
};

struct SuiteResult {
  std::string name;
  std::size_t instances = 0;
  double max_relative_error = 0.0;
};

/// Finite-difference checks of the feature gradients, network backpropagation and the
/// meta-embedding backward pass on small random instances.
std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& options);

}  // namespace lcmh::cli
