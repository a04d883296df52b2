#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lcmh {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A binary or text file does not match its documented layout.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters, inconsistent splits, missing head/tail classes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered while optimizing.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lcmh
