#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace domforge {

// Runs body(i) for i in [0, n) on up to `workers` threads, each owning one
// contiguous chunk. If any call throws, the exception from the lowest chunk
// is rethrown after all threads join, so failures are reported the same way
// for every worker count.
template <typename Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
  const std::size_t threads =
      std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& thread : pool) thread.join();
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

}  // namespace domforge
