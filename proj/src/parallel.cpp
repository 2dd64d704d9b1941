#include "febm/parallel.hpp"

namespace febm {

namespace {
int g_threads = 0;  // 0 = runtime default
}

void set_num_threads(int n) { g_threads = n < 0 ? 0 : n; }

int num_threads() { return g_threads; }

namespace detail {
int resolved_threads() {
#if defined(_OPENMP)
  return g_threads == 0 ? omp_get_max_threads() : g_threads;
#else
  return 1;
#endif
}
}  // namespace detail

}  // namespace febm
