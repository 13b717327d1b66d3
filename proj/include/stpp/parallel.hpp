#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace stpp {

// Runs fn(i) for i in [0, n). Tasks must be independent; callers that reduce
// results afterwards must do so in index order so that the outcome does not
// depend on the schedule. threads == 1 runs inline.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    int hw = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(hw), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace stpp
