#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace causalmine {

// Runs fn(i) for i in [0, n). Each index writes only its own outputs, so the
// result is identical to the sequential execution regardless of thread count.
inline void parallel_for_indexed(std::size_t n, int n_threads, const std::function<void(std::size_t)>& fn) {
    if (n_threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline int env_thread_cap(int requested) {
    if (const char* cap = std::getenv("CAUSAL_MINE_THREADS")) {
        const int c = std::atoi(cap);
        if (c >= 1) return std::min(requested, c);
    }
    return requested;
}

}  // namespace causalmine
