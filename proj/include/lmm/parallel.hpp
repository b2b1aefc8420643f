#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lmm {

// Number of workers for a requested cap; 0 means "all hardware threads".
inline unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned n = requested == 0 ? hw : requested;
    return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

// Runs fn(i) for i in [0, count). Each index is handled exactly once; results must be written
// to per-index slots so the outcome does not depend on scheduling. The exception from the
// lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn &&fn) {
    const unsigned workers = worker_count(threads, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::size_t err_index = count;
    std::exception_ptr err;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back(work);
    }
    pool.clear();
    if (err) {
        std::rethrow_exception(err);
    }
}

} // namespace lmm
