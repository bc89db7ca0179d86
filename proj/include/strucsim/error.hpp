#pragma once

#include <stdexcept>
#include <string>

namespace strucsim {

/// Raised when a caller violates a documented precondition (bad shapes,
/// out-of-range parameters, malformed files).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot produce a meaningful result
/// (e.g. a bound whose hypothesis fails, an exceeded time budget).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace strucsim
