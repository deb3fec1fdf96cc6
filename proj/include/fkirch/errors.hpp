#pragma once
#include <stdexcept>
#include <string>

namespace fkirch {

// Bad arguments, bad configs, violated preconditions.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Solver did not converge or produced something unusable.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

}  // namespace fkirch
