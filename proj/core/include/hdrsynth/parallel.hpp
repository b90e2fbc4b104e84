#pragma once

#include <functional>

namespace hdrsynth {

// Worker count used by parallel_chunks. Resolution order: explicit
// set_thread_count() > HDRSYNTH_THREADS env var > hardware_concurrency.
int thread_count();
void set_thread_count(int n);

// Splits [0, n) into one contiguous chunk per worker and runs fn(begin, end)
// on each. Chunks are disjoint, so results are identical for any worker
// count as long as fn only writes inside its own range.
void parallel_chunks(long n, const std::function<void(long, long)>& fn);

} // namespace hdrsynth
