#pragma once

#include <stdexcept>
#include <string>

namespace rsls {

// Shape mismatch between operands; the message names the offending axis.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown (singular block, divergence, non-finite values).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A representation the library deliberately does not handle
// (e.g. vertex enumeration of a general H-rep polytope).
class UnsupportedRepresentation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_dim(bool ok, const std::string& what) {
  if (!ok) throw DimensionError("dimension mismatch: " + what);
}

}  // namespace rsls
