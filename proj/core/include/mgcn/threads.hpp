#pragma once

#include <cstddef>
#include <functional>

namespace mgcn {

/// Worker threads available to the library: hardware concurrency, capped by
/// the MGCN_THREADS environment variable when it holds a positive integer.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Callers must
/// write results by index; the first exception (lowest i) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mgcn
