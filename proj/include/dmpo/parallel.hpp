#pragma once

#include <cstddef>
#include <functional>

namespace dmpo {

/// Worker cap: DMPO_LAB_THREADS if set and positive, else hardware
/// concurrency (at least 1).
std::size_t thread_budget();

/// Runs body(i) for i in [0, n) on up to thread_budget() threads. Each index
/// runs exactly once; callers write results into slot i so output order is
/// independent of scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dmpo
