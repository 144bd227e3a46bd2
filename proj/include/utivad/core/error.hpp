#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace utivad {

// Bad user input or a violated precondition. CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor shapes that do not compose. Always names the offending axis.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Something went wrong while running (divergence, I/O). CLI exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void fail_validation(Args&&... args) {
  throw ValidationError(detail::concat(std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void fail_dimension(Args&&... args) {
  throw DimensionError(detail::concat(std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void fail_runtime(Args&&... args) {
  throw RuntimeFailure(detail::concat(std::forward<Args>(args)...));
}

}  // namespace utivad
