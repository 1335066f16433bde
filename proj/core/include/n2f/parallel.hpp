#pragma once

#include <cstddef>
#include <functional>

namespace n2f {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency; 0 restores the default.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs fn(i) for every i in [begin, end), split into contiguous blocks, one
/// per worker. Each index is visited exactly once, so outputs written per index
/// do not depend on the thread count. The first exception thrown is rethrown.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& fn);

} // namespace n2f
