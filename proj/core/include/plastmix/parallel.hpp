#pragma once

#include <functional>

namespace plastmix {

/// Worker count: PLASTMIX_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
int thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads in contiguous
/// blocks. Callers write into per-index slots, so results do not depend on
/// the thread count. The first exception thrown by a body is rethrown.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace plastmix
