#pragma once
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace brickyard {

// Global switch for the OpenMP paths. Every parallel kernel writes its
// results by index, so serial and parallel runs are bit-identical; the
// switch exists for the reference/equivalence tests and the benchmark.
inline bool& parallel_flag() {
#ifdef _OPENMP
  static bool on = true;
#else
  static bool on = false;
#endif
  return on;
}

inline void set_parallel(bool on) { parallel_flag() = on; }
inline bool parallel_enabled() {
#ifdef _OPENMP
  return parallel_flag();
#else
  return false;
#endif
}

template <class F>
void parallel_for(int64_t n, F&& body) {
#ifdef _OPENMP
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  for (int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace brickyard
