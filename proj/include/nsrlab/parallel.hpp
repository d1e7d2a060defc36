#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nsrlab {

/// Thread count after applying the NSRLAB_THREADS cap (if set) to `requested`.
/// Zero requests the hardware concurrency.
std::size_t effective_threads(std::size_t requested);

/// Runs fn(i) for i in [0, n) on up to `threads` threads with a static
/// interleaved partition. Each index must write only its own output slot;
/// results are then independent of scheduling. The first exception thrown
/// by any worker is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = threads < n ? threads : n;
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace nsrlab
