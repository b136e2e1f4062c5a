#pragma once

#include <cstddef>
#include <functional>

namespace pst {

// Worker count resolution: explicit argument > PST_THREADS env > hardware.
unsigned default_thread_count();

// Runs fn(i) for i in [0, count). Static partition; fn must only touch
// per-index state, so results do not depend on the number of threads.
// The first exception thrown by any worker is rethrown after the join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

}  // namespace pst
