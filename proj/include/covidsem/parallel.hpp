#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace covidsem {

// 0 or negative requests the runtime default.
inline int effective_threads(int requested) {
#ifdef _OPENMP
  if (requested <= 0) return omp_get_max_threads();
  return requested;
#else
  (void)requested;
  return 1;
#endif
}

// Serial reference path. Parallel callers must produce identical results,
// which holds whenever fn(i) writes only to slot i of preallocated storage
// and derives randomness from a per-index seed.
template <class F>
void serial_for(std::size_t n, F&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

template <class F>
void for_each_index(std::size_t n, int threads, F&& fn) {
  int t = effective_threads(threads);
  if (t <= 1 || n <= 1) {
    serial_for(n, fn);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(t)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    fn(static_cast<std::size_t>(i));
#else
  serial_for(n, fn);
#endif
}

}  // namespace covidsem
