#pragma once

#include <atomic>
#include <iostream>
#include <string>

#include "utivad/core/error.hpp"

namespace utivad {

inline std::atomic<bool>& warnings_enabled() {
  static std::atomic<bool> on{true};
  return on;
}

inline std::atomic<int>& warning_count() {
  static std::atomic<int> n{0};
  return n;
}

template <typename... Args>
void warn(Args&&... args) {
  ++warning_count();
  if (warnings_enabled()) {
    std::clog << "warning: " << detail::concat(std::forward<Args>(args)...) << '\n';
  }
}

}  // namespace utivad
