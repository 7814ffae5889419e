#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace trimap {

/// Resolves a user-facing thread count (0 = all available) to a positive number.
inline std::size_t resolve_threads(std::size_t requested) {
    if (requested == 0) {
        requested = std::max(1u, std::thread::hardware_concurrency());
    }
    return requested;
}

/// Runs fn(begin, end, chunk_index) over contiguous chunks of [0, n).
///
/// Chunk boundaries depend only on n and the number of chunks, so callers that
/// combine per-chunk results in chunk order get the same answer for a given thread count.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(resolve_threads(threads), n));
    if (threads <= 1) {
        fn(std::size_t{0}, n, std::size_t{0});
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(threads);
    workers.reserve(threads);
    for (std::size_t c = 0; c < threads; ++c) {
        const std::size_t begin = n * c / threads;
        const std::size_t end = n * (c + 1) / threads;
        workers.emplace_back([&, begin, end, c] {
            try {
                fn(begin, end, c);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Number of chunks parallel_chunks will actually use for n items.
inline std::size_t chunk_count(std::size_t n, std::size_t threads) {
    return std::max<std::size_t>(1, std::min(resolve_threads(threads), n));
}

} // namespace trimap
