#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mkbo {

// Static-chunked worker pool over [0, count). Results must be written to
// pre-allocated slots indexed by i so aggregation order never depends on the
// thread schedule. threads <= 0 means hardware concurrency.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (threads > count) threads = count;
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }

  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&](int w) {
    try {
      for (int i = w; i < count; i += threads) body(i);
    } catch (...) {
      std::lock_guard lock(err_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mkbo
