#pragma once

#include <functional>

namespace meanfield {

/// Worker count: min(hardware threads, MEANFIELD_THREADS when set and >= 1).
int thread_budget();

/// Runs fn(begin, end) over a static partition of [begin, end) across the
/// thread budget. Partition depends only on the range and budget, so work
/// assignment is deterministic; fn must write to disjoint state per index.
void parallel_for(int begin, int end, const std::function<void(int, int)>& chunk_fn);

}  // namespace meanfield
