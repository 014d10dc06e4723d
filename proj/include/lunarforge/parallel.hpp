#pragma once

#include <cstddef>
#include <functional>

namespace lunarforge {

// Worker count: LUNARFORGE_THREADS if set and positive, else hardware concurrency.
std::size_t default_worker_count();

// Runs body(i) for i in [0, n) on up to `workers` threads. Items are handed out
// dynamically; callers must write only to per-item outputs. The first exception
// thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace lunarforge
