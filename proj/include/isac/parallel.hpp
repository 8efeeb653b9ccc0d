#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace isac {

/// Worker count: ISAC3D_THREADS if set, otherwise hardware concurrency
/// capped at 8.
inline int thread_count() {
  if (const char* env = std::getenv("ISAC3D_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return int(hw == 0 ? 1 : std::min(hw, 8u));
}

/// Static block partition of [0, n); results must be written to
/// pre-allocated slots so the output order is deterministic.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(thread_count(), n < 1 ? 1 : n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([=, &fn] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  for (std::thread& t : pool) t.join();
}

}  // namespace isac
