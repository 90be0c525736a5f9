#pragma once

#include <stdexcept>
#include <string>

namespace stochlyap {

/// Thrown when a caller passes arguments that violate an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state vector that cannot be located (NaN coordinates).
class InvalidState : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// File-format or filesystem failure; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace stochlyap
