#pragma once

#include <stdexcept>
#include <string>

namespace phagoq {

// Precondition violated by the caller (bad size, range, parity...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well-formed but numerically degenerate (zero variance, constant
// frame, single-class mask).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phagoq
