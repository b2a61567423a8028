#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/common/interval.hpp"
#include "psbed/ps/partition.hpp"

namespace psbed::ps {

// Parameter updates produced by processing one contiguous chunk of dataset
// items, kept at per-item granularity so the commit gate can accept or
// reject each item independently and the table can fold updates in
// canonical item order. Flat arrays with offsets; `sw_*` carries opaque
// per-item state writes (e.g. new topic assignments) applied only when the
// item's updates commit.
struct ChunkUpdates {
  int64_t iteration = 0;
  int producer = -1;
  Interval range;  // chunk interval; item_ids all lie inside it

  std::vector<uint32_t> item_ids;
  std::vector<double> item_objective;
  std::vector<uint32_t> key_offset{0};  // per item, into keys/vals
  std::vector<Key> keys;
  std::vector<double> vals;  // keys.size() x dimension
  std::vector<uint32_t> sw_offset{0};  // per item, into sw_slot/sw_value
  std::vector<uint64_t> sw_slot;
  std::vector<uint32_t> sw_value;
  int64_t clamp_incidents = 0;

  size_t ItemCount() const { return item_ids.size(); }

  bool Empty() const { return item_ids.empty(); }

  void Clear() {
    item_ids.clear();
    item_objective.clear();
    key_offset.assign(1, 0);
    keys.clear();
    vals.clear();
    sw_offset.assign(1, 0);
    sw_slot.clear();
    sw_value.clear();
    clamp_incidents = 0;
  }

  // Builder interface used by the workload kernels: one BeginItem per item,
  // then any number of AddUpdate / AddStateWrite calls for that item.
  void BeginItem(uint32_t item, double objective) {
    PSBED_CHECK_MSG(key_offset.size() == item_ids.size() + 1,
                    "BeginItem without closing the previous item");
    item_ids.push_back(item);
    item_objective.push_back(objective);
    key_offset.push_back(static_cast<uint32_t>(keys.size()));
    sw_offset.push_back(static_cast<uint32_t>(sw_slot.size()));
  }

  void AddUpdate(Key key, std::span<const double> delta) {
    PSBED_CHECK_MSG(!item_ids.empty(), "AddUpdate before BeginItem");
    keys.push_back(key);
    vals.insert(vals.end(), delta.begin(), delta.end());
    key_offset.back() = static_cast<uint32_t>(keys.size());
  }

  void AddStateWrite(uint64_t slot, uint32_t value) {
    PSBED_CHECK_MSG(!item_ids.empty(), "AddStateWrite before BeginItem");
    sw_slot.push_back(slot);
    sw_value.push_back(value);
    sw_offset.back() = static_cast<uint32_t>(sw_slot.size());
  }
};

}  // namespace psbed::ps
