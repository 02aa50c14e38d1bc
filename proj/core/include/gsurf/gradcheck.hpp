#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gsurf {

// One parameter group's comparison between analytic gradients and central
// finite differences (h = 1e-4). Groups below 1e-8 magnitude are compared
// absolutely; everything else relatively at 1e-4.
struct GradCheckEntry {
  std::string group;
  double worst_rel = 0.0;   // |a - n| / max(|a|, |n|, 1e-8), worst case
  double analytic = 0.0;    // gradient pair at the worst case
  double numeric = 0.0;
  std::size_t checks = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = true;

  const GradCheckEntry* find(const std::string& group) const;
};

// Finite-difference suites over the rasterizer backward, the deformation
// chain, every loss, the end-to-end loss pipeline, and the deformation
// network (all parameter groups plus input positions). `rounds` reruns the
// randomized scenes with derived seeds. `corrupt_hook` deliberately biases
// one analytic gradient so harness failure reporting can be exercised.
GradCheckReport run_gradcheck(uint64_t seed, int rounds = 1, bool corrupt_hook = false);

std::string format_report(const GradCheckReport& report);

}  // namespace gsurf
