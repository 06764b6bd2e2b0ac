#ifndef MFREG_COUNTERS_HPP
#define MFREG_COUNTERS_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>

namespace mfreg::counters {

// Operation counters for the instrumented kernel variants. Only the
// *_counted entry points update these; the plain kernels used during
// optimization carry no instrumentation overhead.
struct OpCounters {
    std::atomic<std::int64_t> rho_evals{0};          // evaluations of rho-hat
    std::atomic<std::int64_t> image_deriv_loads{0};  // per-point derivative triple loads
    std::atomic<std::int64_t> oracle_stores{0};      // sparse-matrix element stores

    void reset() {
        rho_evals = 0;
        image_deriv_loads = 0;
        oracle_stores = 0;
    }
};

OpCounters& ops();

// Transient-allocation accounting for the memory-complexity comparison.
// Persistent buffers (images, deformation, workspaces, outputs) are not
// reported here; only scratch allocated inside a derivative evaluation.
struct MemTrace {
    std::atomic<std::int64_t> current{0};
    std::atomic<std::int64_t> peak{0};

    void reset() {
        current = 0;
        peak = 0;
    }

    void on_alloc(std::int64_t bytes) {
        const std::int64_t now = current.fetch_add(bytes) + bytes;
        std::int64_t prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
    }

    void on_free(std::int64_t bytes) { current.fetch_sub(bytes); }
};

MemTrace& mem();

// RAII note for a transient buffer of `bytes` bytes.
class ScratchNote {
public:
    explicit ScratchNote(std::int64_t bytes) : bytes_(bytes) { mem().on_alloc(bytes_); }
    ~ScratchNote() { mem().on_free(bytes_); }
    ScratchNote(const ScratchNote&) = delete;
    ScratchNote& operator=(const ScratchNote&) = delete;

private:
    std::int64_t bytes_;
};

} // namespace mfreg::counters

#endif
