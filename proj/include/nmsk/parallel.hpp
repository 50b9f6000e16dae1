#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace nmsk {

/// Pool size: explicit argument, else NMSK_WORKERS, else hardware threads.
inline int default_workers(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NMSK_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Run body(0..n-1) on a bounded pool.  Work items must be independent
/// and write only to their own output slot, so the result is identical
/// for any worker count.
inline void parallel_for(long n, const std::function<void(long)>& body,
                         int workers = 0) {
  const int w = std::min<long>(default_workers(workers), n > 0 ? n : 1);
  if (w <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace nmsk
