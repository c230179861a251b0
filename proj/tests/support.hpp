#pragma once

// Shared helpers for the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "tasksel/core.hpp"
#include "tasksel/textio.hpp"

namespace tasksel::testing {

inline Subset ids(std::initializer_list<TaskId> list) {
  return Subset(std::vector<TaskId>(list));
}

inline Subset full_set(int k) {
  std::vector<TaskId> all(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) all[static_cast<std::size_t>(i)] = i + 1;
  return Subset(std::move(all));
}

/// Deterministic pseudo-random set function in [0, 1). Depends only on the
/// canonical member list, so it is stable across runs and platforms.
inline double hash_f(const Subset& s) {
  return static_cast<double>(fnv1a64(s.str()) >> 11) * 0x1.0p-53;
}

}  // namespace tasksel::testing
