#pragma once

#include <stdexcept>
#include <string>

namespace ksupport {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter (k, lambda, h, eps, ...) is outside its valid range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed: non-finite entries, bad targets, dimension mismatch.
class InputError : public Error {
 public:
  using Error::Error;
};

/// CSV / JSON could not be parsed. Carries the 1-based row and column when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row = 0, long column = 0)
      : Error(row > 0 ? what + " (row " + std::to_string(row) +
                            (column > 0 ? ", column " + std::to_string(column) : std::string()) + ")"
                      : what),
        row_(row),
        column_(column) {}

  long row() const noexcept { return row_; }
  long column() const noexcept { return column_; }

 private:
  long row_;
  long column_;
};

}  // namespace ksupport
