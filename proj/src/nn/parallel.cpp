#include "loadcycle/nn/parallel.hpp"

namespace loadcycle::nn {

int max_threads() {
#if defined(LOADCYCLE_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#if defined(LOADCYCLE_OPENMP)
  omp_set_num_threads(n < 1 ? 1 : n);
#else
  (void)n;
#endif
}

}  // namespace loadcycle::nn
