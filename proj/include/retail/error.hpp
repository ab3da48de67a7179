#pragma once

#include <stdexcept>
#include <string>

namespace retail {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line` is 0 when the failure is not tied to a
/// position (e.g. a missing field); `field` holds a JSON-style path.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string field, std::size_t line = 0)
      : Error(what), field_(std::move(field)), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

/// Well-formed input that breaks a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: divergence, infeasibility, iteration limits.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace retail
