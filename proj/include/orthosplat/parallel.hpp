#pragma once

#include <cstddef>
#include <functional>

namespace orthosplat {

/// Worker count for a requested value; 0 or negative means all logical cores.
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items are claimed dynamically,
/// so fn must only write state owned by item i for the result to be thread-count independent.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn);

} // namespace orthosplat
