#pragma once

#include <cstddef>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace febm {

// Global thread budget for the OpenMP kernels. 0 = runtime default,
// 1 = serial execution. Serial and parallel runs of every kernel produce
// bitwise-identical results: work is partitioned so each output element is
// reduced in a fixed order by exactly one thread.
void set_num_threads(int n);
int num_threads();

namespace detail {
int resolved_threads();
}

// Runs f(i) for i in [0, n). Parallelized when the configured thread budget
// allows and the trip count clears the grain size.
template <class F>
inline void parallel_for(std::size_t n, F&& f, std::size_t grain = 2) {
#if defined(_OPENMP)
  const int threads = detail::resolved_threads();
  if (threads > 1 && n >= grain && !omp_in_parallel()) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      f(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  (void)grain;
  for (std::size_t i = 0; i < n; ++i) f(i);
}

// Scoped override of the thread budget (used by serial reference paths).
class ThreadGuard {
 public:
  explicit ThreadGuard(int n) : saved_(num_threads()) { set_num_threads(n); }
  ~ThreadGuard() { set_num_threads(saved_); }
  ThreadGuard(const ThreadGuard&) = delete;
  ThreadGuard& operator=(const ThreadGuard&) = delete;

 private:
  int saved_;
};

}  // namespace febm
