#pragma once

#include <cstdint>
#include <functional>

namespace pbmix {

// Global worker count for cell-parallel loops. 0 = hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Work is chunked across threads; fn must only
// write to per-index slots so results are identical for any thread count.
// Reductions over the results happen serially at the call site.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace pbmix
