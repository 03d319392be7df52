#pragma once

#include <cstddef>
#include <functional>

namespace ptlab {

/// Worker count from PTLAB_THREADS (unset or 0 = hardware concurrency).
unsigned thread_budget();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write
/// results into slot i, so the collected order never depends on scheduling.
/// After all workers join, the exception from the lowest failing index (if
/// any) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned threads);

}  // namespace ptlab
