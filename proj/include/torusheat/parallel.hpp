#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace torusheat {

// Parallel kernels take an execution policy; exec::serial selects the
// reference implementation kept for testing. Results are designed to be
// bit-identical between the two policies: work is partitioned by index and
// each index's arithmetic is self-contained, so only the order of
// independent writes differs.
enum class exec { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace torusheat
