#pragma once

#include <cstddef>
#include <functional>

namespace turnover {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index runs exactly
/// once; the first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace turnover
