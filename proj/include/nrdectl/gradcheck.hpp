#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nrdectl {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  double step = 1e-5;
  double op_tolerance = 1e-5;
  double simulator_tolerance = 1e-4;
  /// Adds a deliberately wrong backward rule to the suite (sabotage fixture).
  bool inject_fault = false;
};

struct GradcheckCase {
  std::string name;
  double error = 0.0;  // max |analytic - numeric| / max(1, |analytic|)
  double tolerance = 0.0;
  bool passed() const { return error < tolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;

  bool passed() const;
  /// Case with the largest error / tolerance ratio; requires a non-empty report.
  const GradcheckCase& worst() const;
};

/// Randomized central-difference checks cycling through the differentiable
/// ops, the network blocks, and short simulated rollouts.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace nrdectl
