#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#if defined(LOADCYCLE_OPENMP)
#include <omp.h>
#define LOADCYCLE_PRAGMA(x) _Pragma(#x)
#define LOADCYCLE_PARALLEL_FOR LOADCYCLE_PRAGMA(omp parallel for schedule(static))
#else
#define LOADCYCLE_PARALLEL_FOR
#endif

namespace loadcycle::nn {

int max_threads();
void set_num_threads(int n);

// Samples per partial sum when reducing weight gradients over a batch. Fixed,
// so the summation order does not depend on the thread count.
inline constexpr int kReduceChunk = 16;

// Calls fn(sample, acc) for every sample of the batch; acc is a zeroed
// buffer of `width` values private to a fixed chunk of samples. Chunks are
// added into `total` in ascending order.
template <typename T, typename Fn>
void reduce_over_batch(int batch, std::size_t width, T* total, Fn&& fn) {
  const int chunks = (batch + kReduceChunk - 1) / kReduceChunk;
  std::vector<T> partial(static_cast<std::size_t>(chunks) * width, T(0));
  LOADCYCLE_PARALLEL_FOR
  for (int chunk = 0; chunk < chunks; ++chunk) {
    T* acc = partial.data() + static_cast<std::size_t>(chunk) * width;
    const int end = std::min(batch, (chunk + 1) * kReduceChunk);
    for (int b = chunk * kReduceChunk; b < end; ++b) fn(b, acc);
  }
  for (int chunk = 0; chunk < chunks; ++chunk) {
    const T* acc = partial.data() + static_cast<std::size_t>(chunk) * width;
    for (std::size_t i = 0; i < width; ++i) total[i] += acc[i];
  }
}

}  // namespace loadcycle::nn
