#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace artikin {

// Runs fn(i) for i in [0, count) across `threads` workers. Each index writes
// only its own output slot, so callers get bit-identical results for any
// worker count as long as they reduce the slots in index order.
inline void parallel_for(int count, int threads,
                         const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace artikin
