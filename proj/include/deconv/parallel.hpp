#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace deconv {

// Process-wide worker count. Resolution order: set_thread_count() >
// DECONV_THREADS env var > hardware concurrency. The value only controls how
// work is distributed; all reductions are ordered so results do not depend
// on it.
inline std::atomic<int>& thread_count_storage() {
  static std::atomic<int> n{0};
  return n;
}

inline void set_thread_count(int n) { thread_count_storage().store(n > 0 ? n : 0); }

inline int thread_count() {
  int n = thread_count_storage().load();
  if (n > 0) return n;
  if (const char* env = std::getenv("DECONV_THREADS")) {
    int e = std::atoi(env);
    if (e > 0) return e;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, n). Each index is executed exactly once; callers
// that need determinism write into per-index slots and reduce in index order
// afterwards.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  int workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace deconv
