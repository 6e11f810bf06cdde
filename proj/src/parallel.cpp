#include "pbmix/parallel.hpp"

#include <atomic>
#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pbmix {

namespace {
std::atomic<int> g_threads{0};
}

void set_thread_count(int n) { g_threads.store(n < 0 ? 0 : n); }

int thread_count() {
  int n = g_threads.load();
  if (n == 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
  }
  return n;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  const int nt = std::min<std::int64_t>(thread_count(), n > 0 ? n : 1);
  if (nt <= 1 || n < 256) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mtx;
  const std::int64_t chunk = std::max<std::int64_t>(64, n / (8 * nt));
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        if (failed.load(std::memory_order_relaxed)) return;
        const std::int64_t begin = next.fetch_add(chunk);
        if (begin >= n) return;
        const std::int64_t end = std::min(begin + chunk, n);
        try {
          for (std::int64_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mtx);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pbmix
