#pragma once

#include <cstddef>
#include <functional>

namespace kinreg {

/// Worker count used by data-parallel loops; 0 selects hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(i) for i in [0, n). Iterations must be independent; results that
/// feed reductions are written per index and reduced by the caller in index order,
/// so output does not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace kinreg
