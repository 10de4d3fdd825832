#include "occsynth/parallel.hpp"

#include <omp.h>

namespace occsynth {

namespace {
int g_threads = 0;
}

void set_thread_count(int threads) {
  g_threads = threads > 0 ? threads : 0;
  omp_set_num_threads(g_threads > 0 ? g_threads : omp_get_num_procs());
}

int thread_count() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn) {
  if (n <= 0) return;
  if (thread_count() <= 1 || n == 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count())
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace occsynth
