#pragma once

#include <stdexcept>
#include <string>

namespace fsdpo {

// Invalid generator/policy/training configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller broke an API contract (mismatched ids, empty inputs, missing files).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite gradients, divergent loss, and similar mid-run failures.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& what, std::string pair = {})
      : std::runtime_error(what), pair_id(std::move(pair)) {}
  std::string pair_id;
};

// Exact enumeration refused because the state space exceeds the caller's bound.
struct EnumerationBoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fsdpo
