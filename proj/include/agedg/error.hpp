#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agedg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, flags or arguments. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or batch shapes that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A malformed input row or dataset value.
class DataError : public Error {
 public:
  DataError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}
  explicit DataError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_ = 0;
  std::string field_;
};

/// Correlation statistics whose variance (or concordance denominator) is ~0.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace agedg
