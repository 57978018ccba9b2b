#pragma once

#include <cstddef>
#include <functional>

namespace driftmon {

/// Worker count used by parallel_for. 0 means hardware concurrency.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(i) for i in [0, count). Tasks are claimed dynamically but each
/// body writes only its own slot, so results never depend on the worker
/// count. Calls nested inside a worker run serially. The first exception
/// thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace driftmon
