#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace avth {

// Ordered-output parallel map: fn(i) must only write state owned by index i.
// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
    size_t hw = std::thread::hardware_concurrency();
    size_t workers = std::min<size_t>(hw ? hw : 1, n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            size_t i;
            while ((i = next.fetch_add(1)) < n) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace avth
