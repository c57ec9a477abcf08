#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rfodmr {

/// Raised when a caller passes a value outside an operation's domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine fails in a way that indicates a bug.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The least-squares normal matrix is singular; what() names the parameters
/// that are collinear.
class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document; line() is 1-based, 0 when not line-specific.
class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InvalidInput(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rfodmr
