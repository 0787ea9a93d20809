#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace a5cycle {

/// Dynamic chunked work distribution. Workers pull chunk indices from a shared
/// counter; body(chunk, begin, end) must only write to storage owned by its
/// chunk so results are independent of the worker count. The exception of the
/// lowest failing chunk is rethrown.
template <class Body>
void parallel_chunks(std::size_t count, std::size_t chunk_size, unsigned workers, Body&& body) {
    if (count == 0) return;
    chunk_size = std::max<std::size_t>(chunk_size, 1);
    const std::size_t chunks = (count + chunk_size - 1) / chunk_size;
    workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, chunks));

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_chunk = chunks;
    std::atomic<bool> failed{false};

    auto run = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            const std::size_t chunk = next.fetch_add(1, std::memory_order_relaxed);
            if (chunk >= chunks) return;
            const std::size_t begin = chunk * chunk_size;
            const std::size_t end = std::min(count, begin + chunk_size);
            try {
                body(chunk, begin, end);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (chunk < error_chunk) {
                    error_chunk = chunk;
                    error = std::current_exception();
                }
                failed = true;
            }
        }
    };

    if (workers == 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

/// Maps every chunk to a vector and concatenates them in chunk order.
template <class T, class Body>
std::vector<T> parallel_gather(std::size_t count, std::size_t chunk_size, unsigned workers, Body&& body) {
    chunk_size = std::max<std::size_t>(chunk_size, 1);
    const std::size_t chunks = (count + chunk_size - 1) / chunk_size;
    std::vector<std::vector<T>> parts(chunks);
    parallel_chunks(count, chunk_size, workers, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        parts[chunk] = body(begin, end);
    });
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    std::vector<T> out;
    out.reserve(total);
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

}  // namespace a5cycle
