#include "mfreg/counters.hpp"

namespace mfreg::counters {

OpCounters& ops() {
    static OpCounters c;
    return c;
}

MemTrace& mem() {
    static MemTrace m;
    return m;
}

} // namespace mfreg::counters
