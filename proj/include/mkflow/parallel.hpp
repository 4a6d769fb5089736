#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mkflow {

/// Caps the number of worker threads used by per-node loops. A value of
/// zero leaves the runtime default in place. Results never depend on it:
/// every parallel loop writes disjoint outputs and reductions run serially.
inline void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mkflow
