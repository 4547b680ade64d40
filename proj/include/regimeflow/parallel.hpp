#pragma once

#include <cstddef>
#include <functional>

namespace regimeflow {

/// Caps worker threads used by parallel_for. 0 means hardware concurrency.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; results
/// must be written to index-addressed storage so output is order-independent.
/// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace regimeflow
