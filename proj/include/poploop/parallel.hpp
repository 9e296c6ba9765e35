#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace poploop {

// All parallel kernels in this project are deterministic: loop bodies write
// to disjoint slots, and reductions combine fixed-size chunks in chunk order.
// Results are therefore bit-identical for any thread count, which the
// experiment outputs rely on. Serial reference implementations of the hot
// kernels live in serial_ref.hpp and are compared against these in tests and
// in the benchmark tool.

enum class Exec { serial, parallel };

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

template <class Body>
void parallel_for(size_t n, Exec exec, Body&& body) {
  if (exec == Exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<size_t>(i));
    }
    return;
#endif
  }
  for (size_t i = 0; i < n; ++i) body(i);
}

// Fixed chunk width for deterministic reductions. Part of the reproducibility
// contract: changing it changes floating-point summation order.
inline constexpr size_t kReduceChunk = 4096;

// Splits [0, n) into fixed chunks, fills one Partial per chunk (possibly in
// parallel), then folds the partials serially in chunk order.
// chunk_fn(begin, end, Partial&); combine(Partial& into, const Partial&).
template <class Partial, class ChunkFn, class CombineFn>
Partial chunked_reduce(size_t n, Exec exec, ChunkFn&& chunk_fn, CombineFn&& combine,
                       size_t chunk_width = kReduceChunk) {
  const size_t n_chunks = n == 0 ? 0 : (n + chunk_width - 1) / chunk_width;
  std::vector<Partial> parts(n_chunks);
  parallel_for(n_chunks, exec, [&](size_t c) {
    const size_t begin = c * chunk_width;
    const size_t end = begin + chunk_width < n ? begin + chunk_width : n;
    chunk_fn(begin, end, parts[c]);
  });
  Partial total{};
  for (size_t c = 0; c < n_chunks; ++c) combine(total, parts[c]);
  return total;
}

}  // namespace poploop
