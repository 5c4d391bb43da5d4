#pragma once

#include <mutex>

namespace rgs::detail {

// The FFTW planner is not re-entrant; execution with fresh arrays is.
std::mutex& fftw_planner_mutex();

}  // namespace rgs::detail
