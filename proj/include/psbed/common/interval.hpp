#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "psbed/common/error.hpp"

namespace psbed {

// Half-open index interval [begin, end) over dataset items.
struct Interval {
  uint32_t begin = 0;
  uint32_t end = 0;

  uint32_t size() const { return end - begin; }
  bool empty() const { return begin >= end; }
  bool Contains(uint32_t i) const { return i >= begin && i < end; }
  bool Contains(const Interval& o) const {
    return o.empty() || (o.begin >= begin && o.end <= end);
  }
  bool Overlaps(const Interval& o) const {
    return std::max(begin, o.begin) < std::min(end, o.end);
  }
  friend bool operator==(const Interval& a, const Interval& b) {
    return a.begin == b.begin && a.end == b.end;
  }
};

// Sorted set of disjoint, non-adjacent intervals. Used to track which items
// of an iteration have been committed and to validate assignments.
class IntervalSet {
 public:
  // Adds [iv.begin, iv.end); returns false if it overlaps existing content
  // (nothing is added in that case).
  bool Add(const Interval& iv) {
    if (iv.empty()) return true;
    auto it = std::lower_bound(
        parts_.begin(), parts_.end(), iv,
        [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
    if (it != parts_.end() && it->begin < iv.end) return false;
    if (it != parts_.begin() && std::prev(it)->end > iv.begin) return false;
    it = parts_.insert(it, iv);
    // Merge with adjacent neighbours to keep the set canonical.
    if (it != parts_.begin() && std::prev(it)->end == it->begin) {
      std::prev(it)->end = it->end;
      it = parts_.erase(it);
      it = std::prev(it);
    }
    if (std::next(it) != parts_.end() && it->end == std::next(it)->begin) {
      it->end = std::next(it)->end;
      parts_.erase(std::next(it));
    }
    return true;
  }

  // Adds [iv.begin, iv.end), merging with any overlapping content.
  void Union(const Interval& iv) {
    if (iv.empty()) return;
    Interval merged = iv;
    auto it = parts_.begin();
    while (it != parts_.end()) {
      if (it->end < merged.begin || it->begin > merged.end) {
        ++it;
        continue;
      }
      merged.begin = std::min(merged.begin, it->begin);
      merged.end = std::max(merged.end, it->end);
      it = parts_.erase(it);
    }
    auto pos = std::lower_bound(
        parts_.begin(), parts_.end(), merged,
        [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
    parts_.insert(pos, merged);
  }

  bool Contains(uint32_t i) const {
    auto it = std::upper_bound(
        parts_.begin(), parts_.end(), i,
        [](uint32_t v, const Interval& iv) { return v < iv.begin; });
    return it != parts_.begin() && std::prev(it)->Contains(i);
  }

  // True iff the set is exactly one interval equal to `iv`.
  bool CoversExactly(const Interval& iv) const {
    if (iv.empty()) return parts_.empty();
    return parts_.size() == 1 && parts_[0] == iv;
  }

  bool CoversAll(const Interval& iv) const {
    if (iv.empty()) return true;
    auto it = std::upper_bound(
        parts_.begin(), parts_.end(), iv.begin,
        [](uint32_t v, const Interval& p) { return v < p.begin; });
    if (it == parts_.begin()) return false;
    return std::prev(it)->Contains(iv);
  }

  // First index >= from that is not in the set, or `limit` if none below it.
  uint32_t NextUncovered(uint32_t from, uint32_t limit) const {
    uint32_t i = from;
    for (const auto& p : parts_) {
      if (p.end <= i) continue;
      if (p.begin > i) break;
      i = p.end;
    }
    return std::min(i, limit);
  }

  uint64_t TotalSize() const {
    uint64_t n = 0;
    for (const auto& p : parts_) n += p.size();
    return n;
  }

  const std::vector<Interval>& parts() const { return parts_; }
  void Clear() { parts_.clear(); }

 private:
  std::vector<Interval> parts_;
};

}  // namespace psbed
