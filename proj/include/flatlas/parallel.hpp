#ifndef FLATLAS_PARALLEL_HPP
#define FLATLAS_PARALLEL_HPP

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flatlas {

// Batch kernels take an Execution switch. Parallel runs split the index
// range across OpenMP threads; every iteration writes only its own slot, and
// reductions happen serially afterwards in index order, so both modes
// produce identical output. The serial path is the reference implementation
// the tests compare against.
enum class Execution { Serial, Parallel };

template <typename Fn>
void for_each_index(std::size_t n, Execution exec, Fn&& fn) {
#ifdef _OPENMP
  if (exec == Execution::Parallel) {
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
    return;
  }
#else
  (void)exec;
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace flatlas

#endif  // FLATLAS_PARALLEL_HPP
