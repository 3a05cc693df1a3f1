#pragma once

#include <cstddef>
#include <cstdint>

#ifdef BANPPA_HAVE_OPENMP
#include <omp.h>
#endif

namespace banppa::parallel {

enum class Exec { serial, openmp };

// Process-wide default used by the high-level entry points. Defaults to
// openmp when the library was built with it, serial otherwise.
Exec default_exec();
void set_default_exec(Exec exec);
int hardware_threads();

// Index-parallel loop over [0, n). Callers must write results into disjoint
// per-index slots and reduce them serially in index order afterwards; that
// discipline is what makes serial and openmp execution bit-identical.
template <typename Fn>
void for_index(std::size_t n, Exec exec, Fn&& fn) {
#ifdef BANPPA_HAVE_OPENMP
  if (exec == Exec::openmp) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      fn(static_cast<std::size_t>(i));
    }
    return;
  }
#else
  (void)exec;
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

template <typename Fn>
void for_index(std::size_t n, Fn&& fn) {
  for_index(n, default_exec(), fn);
}

}  // namespace banppa::parallel
