#include "hdrsynth/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace hdrsynth {

namespace {

std::atomic<int> g_threads{0};

int detect_threads() {
    if (const char* env = std::getenv("HDRSYNTH_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

} // namespace

int thread_count() {
    int n = g_threads.load(std::memory_order_relaxed);
    return n > 0 ? n : detect_threads();
}

void set_thread_count(int n) {
    g_threads.store(n > 0 ? n : 0, std::memory_order_relaxed);
}

void parallel_chunks(long n, const std::function<void(long, long)>& fn) {
    if (n <= 0) return;
    long workers = std::min<long>(thread_count(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (long t = 0; t < workers; ++t) {
        long begin = n * t / workers;
        long end = n * (t + 1) / workers;
        if (begin == end) continue;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

} // namespace hdrsynth
