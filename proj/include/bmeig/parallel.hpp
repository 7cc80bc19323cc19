#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace bmeig {

/// Runs fn(k) for k in [begin, end) over `threads` workers with a static
/// contiguous partition. The first exception thrown by any worker is
/// rethrown on the caller.
template <typename Fn>
void parallel_for(int begin, int end, int threads, Fn&& fn) {
    const int n = end - begin;
    if (n <= 0) return;
    threads = std::clamp(threads, 1, n);
    if (threads == 1) {
        for (int k = begin; k < end; ++k) fn(k);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        const int lo = begin + static_cast<int>(static_cast<long>(n) * w / threads);
        const int hi = begin + static_cast<int>(static_cast<long>(n) * (w + 1) / threads);
        pool.emplace_back([&, lo, hi, w] {
            try {
                for (int k = lo; k < hi; ++k) fn(k);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace bmeig
