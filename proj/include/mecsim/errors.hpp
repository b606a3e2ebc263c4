#pragma once

#include <stdexcept>
#include <string>

namespace mecsim {

// Invalid or inconsistent configuration (CLI maps this to exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An action violates a per-slot constraint; the message names the constraint.
struct FeasibilityError : std::runtime_error {
  explicit FeasibilityError(const std::string& what) : std::runtime_error(what) {}
};

// An internal invariant was breached, e.g. a critic produced D > Q
// (CLI maps this to exit code 2).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mecsim
