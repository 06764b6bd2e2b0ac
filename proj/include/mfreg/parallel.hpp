#ifndef MFREG_PARALLEL_HPP
#define MFREG_PARALLEL_HPP

#include <cstdint>
#include <functional>

namespace mfreg {

// Global worker-thread cap. 0 = hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(begin, end) over a static contiguous partition of [0, n).
// Workers write disjoint outputs; no ordering guarantees between ranges.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

// Deterministic sum of term(i) for i in [0, n): per-chunk partials are
// computed independently (possibly in parallel) and combined in fixed
// chunk order, so the result is bit-identical for any thread count.
inline constexpr std::int64_t kReductionChunk = 4096;
double chunked_sum(std::int64_t n, const std::function<double(std::int64_t)>& term);

} // namespace mfreg

#endif
