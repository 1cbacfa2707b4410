// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mmsound {

// Number of worker threads used by parallel loops; 0 means hardware concurrency.
inline std::atomic<unsigned>& thread_setting()
{
    static std::atomic<unsigned> n{0};
    return n;
}

inline void set_threads(unsigned n) { thread_setting() = n; }

inline unsigned thread_count()
{
    unsigned n = thread_setting();
    if (n == 0)
        n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

// Runs fn(i) for i in [0, n). Work items must write to disjoint outputs, so
// the result never depends on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn)
{
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w)
        pool.emplace_back(body);
    body();
    pool.clear();
    if (error)
        std::rethrow_exception(error);
}

} // namespace mmsound
