#pragma once

#include <functional>

namespace scm {

// requested > 0 wins; otherwise SCM_ASYM_THREADS, then hardware concurrency.
int thread_count(int requested = 0);

// Runs fn(0..n-1) on up to `threads` workers. The first exception thrown by
// any task is rethrown on the calling thread after all workers stop.
void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0);

}  // namespace scm
