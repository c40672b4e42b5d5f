#pragma once

#include <cstddef>
#include <functional>

namespace scripta {

/// std::thread::hardware_concurrency(), at least 1.
std::size_t default_workers();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs exactly once; the
/// first exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace scripta
