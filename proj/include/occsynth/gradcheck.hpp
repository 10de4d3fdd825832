#pragma once

#include <functional>
#include <string>
#include <vector>

#include "occsynth/distill.hpp"

namespace occsynth {

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

struct GradCheckEntry {
  std::string name;
  int draws = 0;
  size_t comparisons = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double seconds = 0.0;
  bool pass = false;
};

// Central finite differences (h = 1e-4) against every analytic gradient of the
// distillation module: field sampling, occupancy loss, GNLL and rendered depth.
GradCheckReport run_gradcheck(int draws = 200, uint64_t seed = 0, double tolerance = 1e-3);
nlohmann::json report_to_json(const GradCheckReport& r);

// Golden-section search for the minimum of a unimodal f on [lo, hi].
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12);

}  // namespace occsynth
