#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace denrl {

// Runs fn(i) for i in [0, n). threads <= 1 is the serial reference path;
// the OpenMP path requires fn to write only to per-index slots.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
#ifdef _OPENMP
  if (threads > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  (void)threads;
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace denrl
