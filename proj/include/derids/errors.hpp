#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace derids {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CSV/JSON content. `line()` is 1-based; 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data-model invariant.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (e.g. lambda <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Linear system that cannot be solved reliably.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

}  // namespace derids
