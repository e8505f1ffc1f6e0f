#pragma once

#include <cstddef>
#include <functional>

namespace fracweak {

/// Worker count: FRACWEAK_THREADS when set to a positive integer, else the hardware concurrency.
int default_thread_count();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index runs exactly once;
/// callers write results into per-index slots so output never depends on the schedule.
/// The exception from the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace fracweak
