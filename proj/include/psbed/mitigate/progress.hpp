#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "psbed/bench/clock.hpp"
#include "psbed/common/error.hpp"

namespace psbed::mitigate {

// Broadcast at fixed fractions of a worker's iteration (every 10% by
// default) so peers and the coordinator can spot laggards early.
struct ProgressReport {
  int worker = -1;
  int64_t iteration = 0;
  double fraction_done = 0.0;
  bench::Ticks timestamp = 0;
};

inline double MedianOf(std::vector<double> xs) {
  PSBED_CHECK_MSG(!xs.empty(), "median of an empty set");
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Self-identification rule: a worker is a straggler when the median of its
// peers' progress for the same iteration window exceeds its own by strictly
// more than `threshold`. No peers -> nothing to compare against -> false.
inline bool DetectStraggler(double self_fraction,
                            const std::vector<double>& peer_fractions,
                            double threshold) {
  PSBED_CHECK_MSG(threshold >= 0.0, "detection threshold must be >= 0");
  if (peer_fractions.empty()) return false;
  return MedianOf(peer_fractions) - self_fraction > threshold;
}

}  // namespace psbed::mitigate
