#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace muq {

/// Resolves a requested thread count: 0 means hardware concurrency.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(0..count-1). Work items must be independent and must not let
/// exceptions escape; callers that need deterministic output write into
/// preallocated index slots. Serial when threads resolves to 1.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    int nt = resolve_threads(threads);
    if (static_cast<std::size_t>(nt) > count) nt = static_cast<int>(count);
    if (nt <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t]() {
            for (std::size_t i = static_cast<std::size_t>(t); i < count; i += static_cast<std::size_t>(nt)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace muq
