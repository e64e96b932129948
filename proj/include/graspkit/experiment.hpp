// Trial statistics and experiment campaigns: binomial confidence
// intervals for success rates, and (below) batch runners that drive the
// simulator + controller over many seeded trials and aggregate reports.
#pragma once

#include <cmath>

#include "graspkit/core.hpp"

namespace graspkit {
namespace experiment {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

/// Wilson score interval for a binomial proportion. Unlike the normal
/// approximation it stays inside [0,1] and behaves at 0 and n successes,
/// which small trial counts hit routinely.
inline Interval wilson_interval(int successes, int trials, double z = 1.96) {
  require(trials > 0, "wilson_interval: trials must be positive");
  require(successes >= 0 && successes <= trials, "wilson_interval: successes out of range");
  const double n = double(trials);
  const double p = double(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // The exact interval lies in [0,1]; rounding can overshoot by an ulp.
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace experiment
}  // namespace graspkit
