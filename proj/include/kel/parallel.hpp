#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace kel {

// Worker count: KEL_THREADS env var caps it, default = hardware concurrency.
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into per-index tasks pulled from
// a shared counter; fn must only write to its own slot so that results do not
// depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Fixed-shape pairwise tree sum. The reduction order depends only on the
// vector length, never on thread count, so repeated runs are bit-identical.
double tree_sum(std::vector<double> xs);

}  // namespace kel
