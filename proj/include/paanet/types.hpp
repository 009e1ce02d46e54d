// SPDX-License-Identifier: Apache-2.0

#ifndef PAANET_TYPES_HPP
#define PAANET_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace paanet {

/// Dense 4-D layout: batch, channels, rows, cols (NCHW).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  Shape() = default;
  Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {}

  std::int64_t numel() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

/// Precondition violations (shape mismatches, bad configs).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Invalid object state (e.g. eval-mode batch norm before any statistics).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Corrupt or incompatible serialized data.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem / codec failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

}  // namespace paanet

#endif  // PAANET_TYPES_HPP
