#pragma once

#include <cstddef>
#include <functional>

namespace rbc {

/// Worker count from RBC_WORKERS, else the hardware concurrency (at least 1).
int worker_count();

/// Overrides the worker count for this process; 0 restores the default.
void set_worker_count(int n);

/// Runs fn(0) .. fn(n-1). Each index must write only its own output slot;
/// results are then independent of scheduling. Calls made from inside a
/// running parallel_for execute serially on the calling thread. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace rbc
