#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ragvv {

/// Runs fn(worker, i) for i in [0, count) on `workers` threads. The first
/// exception thrown stops further dispatch and is rethrown after all join.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    const auto threads = static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(std::max<std::size_t>(count, 1))));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&](std::size_t worker) {
        for (;;) {
            if (failed.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(worker, i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    if (threads == 1) {
        body(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(body, w);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace ragvv
