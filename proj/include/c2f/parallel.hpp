#pragma once

#include <cstddef>
#include <functional>

namespace c2f {

// Worker cap. Initialised from C2F_THREADS (0 or unset = hardware concurrency).
std::size_t worker_threads();
void set_worker_threads(std::size_t count);

// Runs body(i) for i in [0, count). Each index must write disjoint memory;
// callers reduce per-index partials in index order, so results do not depend
// on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace c2f
