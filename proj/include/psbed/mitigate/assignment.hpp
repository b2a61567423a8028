#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/common/interval.hpp"

namespace psbed::mitigate {

// Contiguous per-worker split of the dataset index space. The base split is
// fixed for the whole run; reassignment moves tails for one iteration only
// and never mutates the base.
class WorkAssignment {
 public:
  static WorkAssignment EvenSplit(uint32_t num_items, int num_workers) {
    PSBED_CHECK_MSG(num_workers > 0, "need at least one worker");
    std::vector<uint32_t> counts(num_workers, num_items / num_workers);
    for (uint32_t r = 0; r < num_items % num_workers; ++r) counts[r] += 1;
    return FromCounts(counts);
  }

  static WorkAssignment FromCounts(const std::vector<uint32_t>& counts) {
    PSBED_CHECK_MSG(!counts.empty(), "need at least one worker");
    WorkAssignment a;
    uint32_t begin = 0;
    for (uint32_t c : counts) {
      a.ranges_.push_back(Interval{begin, begin + c});
      begin += c;
    }
    a.num_items_ = begin;
    return a;
  }

  int num_workers() const { return static_cast<int>(ranges_.size()); }
  uint32_t num_items() const { return num_items_; }

  const Interval& RangeOf(int worker) const {
    PSBED_CHECK_MSG(worker >= 0 && worker < num_workers(),
                    "worker out of range");
    return ranges_[worker];
  }

  // Ranges are disjoint, contiguous and tile [0, num_items) exactly.
  void Validate() const {
    uint32_t begin = 0;
    for (const auto& r : ranges_) {
      PSBED_CHECK_MSG(r.begin == begin, "assignment ranges must tile");
      PSBED_CHECK_MSG(r.end >= r.begin, "assignment range inverted");
      begin = r.end;
    }
    PSBED_CHECK_MSG(begin == num_items_, "assignment does not cover dataset");
  }

 private:
  std::vector<Interval> ranges_;
  uint32_t num_items_ = 0;
};

// Tail of a straggler's remaining interval claimed by a helper: the last
// round(shed_fraction x size) items. shed_fraction must lie in (0, 0.5] —
// shedding more than half of what remains would invert the roles.
inline Interval ShedTail(const Interval& remaining, double shed_fraction) {
  PSBED_CHECK_MSG(shed_fraction > 0.0 && shed_fraction <= 0.5,
                  "shed fraction must lie in (0, 0.5]");
  const auto tail = static_cast<uint32_t>(
      std::llround(shed_fraction * static_cast<double>(remaining.size())));
  return Interval{remaining.end - tail, remaining.end};
}

}  // namespace psbed::mitigate
