#pragma once

#include <cstddef>
#include <functional>

namespace sonic {

/// Worker cap: SONIC_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) across up to worker_count() threads.
/// Callers are responsible for writing results into per-index slots so that
/// any reduction afterwards happens in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sonic
