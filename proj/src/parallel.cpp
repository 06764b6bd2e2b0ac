#include "mfreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace mfreg {

namespace {
std::atomic<int> g_threads{0};

int effective_threads() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n <= 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
    }
    return std::max(1, n);
}
} // namespace

void set_thread_count(int n) { g_threads.store(n, std::memory_order_relaxed); }

int thread_count() { return effective_threads(); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) {
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(effective_threads(), n));
    if (workers == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t base = n / workers;
    const std::int64_t rem = n % workers;
    std::int64_t begin = 0;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t len = base + (w < rem ? 1 : 0);
        const std::int64_t end = begin + len;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
        begin = end;
    }
    for (auto& t : pool) {
        t.join();
    }
}

double chunked_sum(std::int64_t n, const std::function<double(std::int64_t)>& term) {
    if (n <= 0) {
        return 0.0;
    }
    const std::int64_t nchunks = (n + kReductionChunk - 1) / kReductionChunk;
    std::vector<double> partials(static_cast<std::size_t>(nchunks), 0.0);
    parallel_for(nchunks, [&](std::int64_t cb, std::int64_t ce) {
        for (std::int64_t c = cb; c < ce; ++c) {
            const std::int64_t lo = c * kReductionChunk;
            const std::int64_t hi = std::min(n, lo + kReductionChunk);
            double s = 0.0;
            for (std::int64_t i = lo; i < hi; ++i) {
                s += term(i);
            }
            partials[static_cast<std::size_t>(c)] = s;
        }
    });
    double total = 0.0;
    for (double p : partials) {
        total += p;
    }
    return total;
}

} // namespace mfreg
