#pragma once

#include <stdexcept>
#include <string>

namespace collapse {

// Block structure of two objects disagrees (wrong number of macrostates,
// wrong block sizes, wrong matrix shape).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition on arguments or configuration is violated.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical integration produced a non-finite or non-unitary state.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic cannot be formed from the data supplied.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace collapse
