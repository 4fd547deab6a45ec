#pragma once

#include <stdexcept>
#include <string>

namespace semisamp {

/// Caller supplied an argument that violates an operation's precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Serialized data is malformed, truncated or internally inconsistent.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required file or frame is absent.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semisamp
