#pragma once

#include <cstddef>
#include <functional>

namespace toa {

// Worker count used by parallel_for. Zero or negative restores the default
// (hardware concurrency).
void set_thread_count(int n);
int thread_count();

// Calls fn(i) for i in [0, n). Every index is evaluated exactly once and
// independently, so results never depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace toa
