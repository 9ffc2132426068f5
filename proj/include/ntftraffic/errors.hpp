#pragma once

#include <stdexcept>
#include <string>

namespace ntftraffic {

/// Index outside the valid range of a tensor way.
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Operands whose dimensions do not agree.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A numeric parameter outside the accepted domain of an operation.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input data violating a mathematical precondition (e.g. negative entries).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Iterative numerical routine that failed to converge.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Basis with no support on the observed entries.
struct DegenerateBasisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ntftraffic
