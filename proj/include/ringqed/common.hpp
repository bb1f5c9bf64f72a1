#pragma once

#include <stdexcept>
#include <string>

namespace ringqed {

/// Bad user input: violated precondition, malformed config, invalid flag.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure at runtime: diverged iteration, singular system.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr const char* kToolkitName = "ringqed";
inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace ringqed
