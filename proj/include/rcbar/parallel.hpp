#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rcbar {

// Run fn(begin, end) over contiguous index blocks.  Each task must write
// only to its own output slots; results are then independent of the
// worker count by construction.
template <typename Fn>
void parallel_for_chunks(std::size_t total, unsigned workers, Fn&& fn) {
    workers = std::max(1u, workers);
    if (workers == 1 || total <= 1) {
        fn(std::size_t{0}, total);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(workers, total);
    const std::size_t chunk = (total + nthreads - 1) / nthreads;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nthreads);
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(total, begin + chunk);
        pool.emplace_back([&, t, begin, end] {
            try {
                if (begin < end) fn(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace rcbar
