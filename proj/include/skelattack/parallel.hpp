#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace skelattack {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// to per-index slots so the output does not depend on scheduling. The first
// exception thrown by any task is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace skelattack
