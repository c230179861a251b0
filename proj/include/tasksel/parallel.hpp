#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace tasksel {

/// Runs body(i) for i in [0, count), split into contiguous static blocks, one
/// per worker thread. Callers produce deterministic results by writing outputs
/// by index (never by arrival order). The first worker exception is rethrown.
template <class F>
void parallel_for(std::int64_t count, int workers, F&& body) {
  if (count <= 0) return;
  if (workers <= 1 || count == 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  const int w = static_cast<int>(
      std::min<std::int64_t>(static_cast<std::int64_t>(workers), count));
  const std::int64_t chunk = (count + w - 1) / w;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::int64_t lo = static_cast<std::int64_t>(t) * chunk;
        const std::int64_t hi = std::min(count, lo + chunk);
        for (std::int64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tasksel
