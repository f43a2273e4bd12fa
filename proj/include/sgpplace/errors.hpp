#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sgpplace {

/// Precondition violated by the caller (bad shapes, out-of-range parameters).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization or optimization produced an unusable result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampling could not find enough obstacle-free points.
class EnvironmentDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written. The message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CSV/JSON input. Row and column are 1-based; 0 means "not applicable".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : std::runtime_error(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    std::string msg = what;
    if (row > 0) msg += " (row " + std::to_string(row);
    if (row > 0 && column > 0) msg += ", column " + std::to_string(column);
    if (row > 0) msg += ")";
    return msg;
  }

  std::size_t row_;
  std::size_t column_;
};

}  // namespace sgpplace
