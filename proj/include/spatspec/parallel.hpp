#pragma once

#include <cstddef>
#include <functional>

namespace spatspec {

/// Worker count from SPATSPEC_THREADS when set and positive, else hardware concurrency.
[[nodiscard]] int default_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Callers write results by
/// index, so output never depends on scheduling. The first exception is rethrown after
/// all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace spatspec
