#pragma once

#include <functional>

namespace hypoips {

/// Runs body(0..count-1) on up to `workers` threads. Indices are handed out
/// in order; the first exception is rethrown after all threads finish.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

}  // namespace hypoips
