#include "banppa/parallel.hpp"

#include <atomic>

namespace banppa::parallel {

namespace {

std::atomic<Exec>& exec_slot() {
#ifdef BANPPA_HAVE_OPENMP
  static std::atomic<Exec> slot{Exec::openmp};
#else
  static std::atomic<Exec> slot{Exec::serial};
#endif
  return slot;
}

}  // namespace

Exec default_exec() { return exec_slot().load(std::memory_order_relaxed); }

void set_default_exec(Exec exec) { exec_slot().store(exec, std::memory_order_relaxed); }

int hardware_threads() {
#ifdef BANPPA_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace banppa::parallel
