#pragma once

#include <cstddef>
#include <functional>

namespace plateau {

/// Worker count: PLATEAU_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads with a static
/// partition. Callers write results into per-index slots, so any reduction they
/// do afterwards is order-fixed. The exception of the lowest failing index is
/// rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace plateau
