#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "psbed/common/error.hpp"

namespace psbed::consistency {

enum class SyncMode { kBsp, kSsp };

// Synchronization policy for a run. BSP is the slack-0 special case of the
// slack-bounded model: a worker may start iteration c+1 only once every
// worker has finished iteration c. Mitigation flags ride along here because
// mode names in reports are derived from the triple (mode, rr, speculation).
struct SyncPolicy {
  SyncMode mode = SyncMode::kBsp;
  int slack = 0;                 // must be 0 for BSP, >= 0 for SSP
  bool reassignment = false;     // shed work from detected stragglers
  bool speculation = false;      // clone the most-lagging worker's remainder

  void Validate() const {
    if (mode == SyncMode::kBsp) {
      PSBED_CHECK_MSG(slack == 0, "bsp requires slack 0");
    } else {
      PSBED_CHECK_MSG(slack >= 0, "ssp slack must be non-negative");
    }
  }

  std::string Name() const {
    std::string n = mode == SyncMode::kBsp ? "bsp" : "ssp";
    if (reassignment) n += "-rr";
    if (speculation) n += "-spec";
    return n;
  }
};

// Admission rule: a worker whose clock is `worker_clock` may read for its
// next iteration iff it is no more than `slack` iterations ahead of the
// slowest worker. Pure; the blocking wrapper lives with the harness.
inline bool MayProceed(int64_t worker_clock, int64_t min_clock,
                       const SyncPolicy& policy) {
  PSBED_CHECK_MSG(worker_clock >= min_clock,
                  "worker clock below the cluster minimum");
  return worker_clock - min_clock <= policy.slack;
}

// Immutable snapshot of all worker clocks at one instant.
struct ClusterClockView {
  std::vector<int64_t> clocks;

  int64_t MinClock() const {
    PSBED_CHECK_MSG(!clocks.empty(), "clock view with no workers");
    return *std::min_element(clocks.begin(), clocks.end());
  }
  int64_t MaxClock() const {
    PSBED_CHECK_MSG(!clocks.empty(), "clock view with no workers");
    return *std::max_element(clocks.begin(), clocks.end());
  }
};

}  // namespace psbed::consistency
