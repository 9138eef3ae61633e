#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace pfopt {

inline int& num_threads_ref() {
    static int n = 1;
    return n;
}
inline void set_num_threads(int n) { num_threads_ref() = std::max(1, n); }
inline int num_threads() { return num_threads_ref(); }

/// Data-parallel loop over [begin, end); chunks are disjoint index ranges so the
/// body may write freely to per-index locations.
template <class F>
void parallel_for(int begin, int end, F&& body) {
    const int nt = std::min(num_threads(), std::max(1, end - begin));
    if (nt <= 1) {
        for (int i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(std::size_t(nt));
    const int count = end - begin;
    for (int t = 0; t < nt; ++t) {
        const int lo = begin + int(std::int64_t(count) * t / nt);
        const int hi = begin + int(std::int64_t(count) * (t + 1) / nt);
        workers.emplace_back([lo, hi, &body] {
            for (int i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace pfopt
