#pragma once

#include <cstddef>
#include <functional>

namespace qnls {

// Worker count for data-parallel kernels. QNLS_THREADS overrides the value set here.
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n) across the worker pool. Each index writes only its
// own output slot, so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace qnls
