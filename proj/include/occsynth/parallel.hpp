#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace occsynth {

// Caps the worker count for every parallel loop in the library (0 = runtime default).
void set_thread_count(int threads);
int thread_count();

// Runs fn(i) for i in [0, n). Iterations must be independent; results stay
// identical for any thread count as long as fn only writes slot i.
void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn);

// Pairwise (tree) summation with a fixed association order.
double pairwise_sum(std::span<const double> values);

}  // namespace occsynth
