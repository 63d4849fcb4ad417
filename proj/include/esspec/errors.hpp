#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace esspec {

// Malformed expression text.  `offset` is the 0-based character position at
// which parsing failed; it is also embedded in the message.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t offset_)
      : std::runtime_error(msg + " (offset " + std::to_string(offset_) + ")"),
        offset(offset_) {}
  std::size_t offset;
};

// Evaluation left a function's domain: log/sqrt of a nonpositive value,
// division by zero, fractional power of a nonpositive base.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally invalid coefficient data: nonpositive p, non-Hermitian D,
// dimension mismatch, empty interval.
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A spectral parameter too close to an eigenvalue of D(t) for the resolvent
// to be formed.  `distance` is dist(lambda, spec D(t)) at the offending t.
struct PoleError : std::runtime_error {
  PoleError(const std::string& msg, double distance_)
      : std::runtime_error(msg), distance(distance_) {}
  double distance;
};

// A numeric procedure could not meet its contract: extrapolation diverged
// where a limit was required, mixed case classification over a window,
// a fit with excessive residual, a missing root.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace esspec
