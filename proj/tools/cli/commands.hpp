#pragma once

#include <iosfwd>

namespace lcmh::cli {

/// Full command-line entry point. Exit codes: 0 success, 1 usage or configuration error,
/// 2 I/O or file-format error, 3 numerical failure (divergence, gradient check failure).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lcmh::cli
