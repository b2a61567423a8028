#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/mitigate/progress.hpp"

namespace psbed::mitigate {

struct ClonePolicy {
  double lag_threshold = 0.3;  // median progress lead that marks a laggard
  int max_clones = 2;          // concurrent speculative tasks

  void Validate() const {
    PSBED_CHECK_MSG(lag_threshold > 0.0 && lag_threshold < 1.0,
                    "clone lag threshold must lie in (0, 1)");
    PSBED_CHECK_MSG(max_clones >= 1, "max_clones must be >= 1");
  }
};

// One speculative duplication: `clone` re-executes the remaining interval of
// `laggard`'s current iteration; the first full completion commits and the
// other side's updates are discarded.
struct ClonePairing {
  int laggard = -1;
  int clone = -1;
};

// Pure pairing decision. `fractions[w]` is worker w's progress through the
// decision window (1.0 = finished), `idle` lists workers free to run a
// clone, `cloned` lists laggards that already have a clone in flight.
// Most-lagging laggards pair with lowest-id idle workers first; ties in
// progress break toward the lower worker id.
inline std::vector<ClonePairing> SpeculativeClone(
    const std::vector<double>& fractions, const std::vector<int>& idle,
    const std::vector<int>& cloned, const ClonePolicy& policy) {
  policy.Validate();
  std::vector<ClonePairing> decisions;
  if (fractions.empty() || idle.empty()) return decisions;
  const double med = MedianOf(fractions);
  std::vector<int> laggards;
  for (int w = 0; w < static_cast<int>(fractions.size()); ++w) {
    if (med - fractions[w] <= policy.lag_threshold) continue;
    if (std::find(cloned.begin(), cloned.end(), w) != cloned.end()) continue;
    if (std::find(idle.begin(), idle.end(), w) != idle.end()) continue;
    laggards.push_back(w);
  }
  std::sort(laggards.begin(), laggards.end(), [&](int a, int b) {
    if (fractions[a] != fractions[b]) return fractions[a] < fractions[b];
    return a < b;
  });
  std::vector<int> free_idle = idle;
  std::sort(free_idle.begin(), free_idle.end());
  const int budget = policy.max_clones - static_cast<int>(cloned.size());
  for (int i = 0; i < static_cast<int>(laggards.size()) &&
                  i < static_cast<int>(free_idle.size()) && i < budget;
       ++i) {
    decisions.push_back(ClonePairing{laggards[i], free_idle[i]});
  }
  return decisions;
}

}  // namespace psbed::mitigate
