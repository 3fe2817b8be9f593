#pragma once

#include <stdexcept>

namespace nearcrit {

// Raised when an input violates an operation's precondition.
struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when a request exceeds what an exhaustive routine can handle.
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const char* message) {
  if (!ok) throw InvalidParameter(message);
}

}  // namespace nearcrit
