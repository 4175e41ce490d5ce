#pragma once

#include <cstddef>
#include <functional>

namespace prefalign {

/// Worker cap for parallel_for (default 1). Results never depend on it:
/// callers give each index its own seed and reduce in index order.
void set_thread_count(int threads);
int thread_count();

/// Runs fn(0..n-1); the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace prefalign
