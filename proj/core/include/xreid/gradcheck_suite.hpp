#pragma once

#include <string>
#include <vector>

namespace xreid {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double threshold = 1e-4;
  bool pass() const { return max_rel_err < threshold; }
};

struct GradCheckOptions {
  int seeds = 100;
  int batch_size = 4;
  int embed_dim = 16;
  int classes = 10;
  // Test hook: corrupts one analytic gradient of the first case so the
  // failure path can be exercised deliberately.
  bool flip_sign = false;
};

// Central-finite-difference verification of every loss variant plus the
// end-to-end tiny model (encoder + batch normalization + hybrid loss).
// Random inputs are screened away from clamp/relu kinks, where one-sided
// derivatives make the comparison meaningless.
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckOptions& opts);

}  // namespace xreid
