#pragma once

#include <cstddef>
#include <functional>

namespace rgs {

/// Worker count used by the data-parallel kernels. Initialised from the
/// RGS_WORKERS environment variable, falling back to hardware concurrency.
int worker_count();
void set_worker_count(int workers);

/// Runs fn(i) for i in [0, n). Each index is processed by exactly one worker
/// and the work per index must be independent, so results never depend on the
/// worker count. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace rgs
