#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <cstdint>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace qnv::detail {

/// Runs compute(i) for i in [0, count) on up to `jobs` threads and hands each
/// result to consume(i, result) in ascending i on the calling thread. At most
/// `window` results are held at once.
template <typename Result>
void ordered_parallel(std::uint64_t count, unsigned jobs, std::uint64_t window,
                      const std::function<Result(std::uint64_t)>& compute,
                      const std::function<void(std::uint64_t, Result&&)>& consume) {
    jobs = std::max(1u, jobs);
    window = std::max<std::uint64_t>(window, jobs);
    if (jobs == 1) {
        for (std::uint64_t i = 0; i < count; ++i) consume(i, compute(i));
        return;
    }
    std::vector<std::optional<Result>> slots;
    for (std::uint64_t base = 0; base < count; base += window) {
        const std::uint64_t n = std::min(window, count - base);
        slots.assign(static_cast<std::size_t>(n), std::nullopt);
        std::atomic<std::uint64_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&] {
            while (true) {
                const std::uint64_t k = next.fetch_add(1);
                if (k >= n) return;
                try {
                    slots[static_cast<std::size_t>(k)].emplace(compute(base + k));
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(n);
                    return;
                }
            }
        };
        {
            std::vector<std::jthread> threads;
            const unsigned spawn = static_cast<unsigned>(std::min<std::uint64_t>(jobs, n));
            for (unsigned t = 0; t < spawn; ++t) threads.emplace_back(worker);
        }
        if (error) std::rethrow_exception(error);
        for (std::uint64_t k = 0; k < n; ++k) consume(base + k, std::move(*slots[static_cast<std::size_t>(k)]));
    }
}

}  // namespace qnv::detail
