#pragma once

#include <cstddef>
#include <functional>

namespace rydlock {

/// Runs task(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Tasks must write only to their own index. If any task
/// throws, the exception of the lowest failing index is rethrown after all
/// workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task);

}  // namespace rydlock
