#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace levymc {

// Chunked parallel loop with a scheduling-independent work decomposition: the
// chunk grid depends only on (n, chunk); workers pull chunk ids from an atomic
// counter. Callers that aggregate must do so per chunk and reduce in chunk
// order after the join, which keeps results bit-identical across thread counts.
inline void parallel_for_chunks(std::size_t n, std::size_t chunk, unsigned threads,
                                const std::function<void(std::size_t chunk_id, std::size_t begin,
                                                         std::size_t end)>& body) {
    if (n == 0) return;
    if (chunk == 0) chunk = 1;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    if (threads <= 1 || n_chunks == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            body(c, c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            body(c, c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

inline unsigned default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

}  // namespace levymc
