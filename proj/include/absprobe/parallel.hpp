#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace absprobe {

/// Runs f(i) for i in [0, n) on up to `jobs` threads. If any call throws, the
/// exception from the smallest failing index is rethrown, so failures do not
/// depend on scheduling.
template <class F> void parallel_for(std::size_t n, unsigned jobs, F &&f) {
    jobs = std::max(1u, jobs);
    if (jobs == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::optional<std::size_t> failed_at;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failed_at || i < *failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned count = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t)
        pool.emplace_back(worker);
    for (auto &t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

template <class T, class F> std::vector<T> parallel_map(std::size_t n, unsigned jobs, F &&f) {
    std::vector<std::optional<T>> slots(n);
    parallel_for(n, jobs, [&](std::size_t i) { slots[i].emplace(f(i)); });
    std::vector<T> out;
    out.reserve(n);
    for (auto &s : slots)
        out.push_back(std::move(*s));
    return out;
}

/// Generates candidates in index order, in parallel blocks, and feeds them to
/// `accept` sequentially until it has taken `quota` of them. `accept` sees
/// the same candidate sequence regardless of `jobs`.
template <class T, class Gen, class Accept>
std::size_t quota_select(std::size_t quota, std::size_t max_candidates, unsigned jobs, Gen &&gen, Accept &&accept) {
    std::size_t taken = 0;
    std::size_t index = 0;
    const std::size_t block = std::max<std::size_t>(256, 64 * static_cast<std::size_t>(std::max(1u, jobs)));
    while (taken < quota && index < max_candidates) {
        const std::size_t n = std::min(block, max_candidates - index);
        const std::size_t base = index;
        auto batch = parallel_map<T>(n, jobs, [&](std::size_t k) { return gen(base + k); });
        for (std::size_t k = 0; k < n && taken < quota; ++k)
            if (accept(std::move(batch[k]), base + k))
                ++taken;
        index += n;
    }
    return taken;
}

} // namespace absprobe
