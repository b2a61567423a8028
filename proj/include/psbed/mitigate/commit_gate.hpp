#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/common/interval.hpp"
#include "psbed/ps/table.hpp"
#include "psbed/ps/updates.hpp"

namespace psbed::mitigate {

// Exactly-once barrier between executors and the parameter server.
//
// Mitigation lets several executors race over the same items (a straggler and
// its helper around a revoked boundary, an original and its speculative
// clone). Every produced chunk funnels through here: for each item the gate
// checks whether (iteration, item) was already committed — if not, the item's
// updates stage into the table, its state writes apply, and the item is
// marked; otherwise the item is dropped before it reaches the server. At
// iteration seal time the committed set must tile the dataset exactly once.
class CommitGate {
 public:
  CommitGate(uint32_t num_items, ps::ParameterTable& table)
      : num_items_(num_items), table_(&table) {}

  struct Outcome {
    uint32_t accepted_items = 0;
    uint32_t rejected_items = 0;
    double objective = 0.0;  // contributions of accepted items only
  };

  // Receives an accepted item's opaque state writes (e.g. topic
  // assignments); owned by the workload, which may lock around it.
  using StateSink = std::function<void(uint64_t slot, uint32_t value)>;

  // Commits one chunk; per-item state writes flow to `sink` only when the
  // item is accepted, so a losing duplicate never touches workload state.
  Outcome Commit(const ps::ChunkUpdates& chunk, const StateSink& sink = {}) {
    std::lock_guard<std::mutex> lock(mu_);
    Outcome out;
    IterationState& st = iterations_[chunk.iteration];
    const int dim = table_->config().dimension;
    for (size_t i = 0; i < chunk.ItemCount(); ++i) {
      const uint32_t item = chunk.item_ids[i];
      PSBED_CHECK_MSG(item < num_items_, "item outside the dataset");
      if (!st.committed.Add(Interval{item, item + 1})) {
        ++out.rejected_items;
        continue;
      }
      ++out.accepted_items;
      out.objective += chunk.item_objective[i];
      for (uint32_t k = chunk.key_offset[i]; k < chunk.key_offset[i + 1];
           ++k) {
        table_->StageItem(chunk.iteration, item, chunk.keys[k],
                          std::span<const double>(chunk.vals)
                              .subspan(static_cast<size_t>(k) * dim, dim));
      }
      if (sink) {
        for (uint32_t s = chunk.sw_offset[i]; s < chunk.sw_offset[i + 1];
             ++s) {
          sink(chunk.sw_slot[s], chunk.sw_value[s]);
        }
      }
    }
    st.objective += out.objective;
    st.clamp_incidents += chunk.clamp_incidents;
    return out;
  }

  bool Covered(int64_t iteration, uint32_t item) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = iterations_.find(iteration);
    return it != iterations_.end() && it->second.committed.Contains(item);
  }

  // First uncommitted item in [from, limit), or limit if fully covered.
  uint32_t NextUncovered(int64_t iteration, uint32_t from,
                         uint32_t limit) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = iterations_.find(iteration);
    if (it == iterations_.end()) return from;
    return it->second.committed.NextUncovered(from, limit);
  }

  bool RangeCovered(int64_t iteration, const Interval& range) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = iterations_.find(iteration);
    return it != iterations_.end() && it->second.committed.CoversAll(range);
  }

  // Every dataset item must have committed exactly once for the iteration.
  void VerifyIterationComplete(int64_t iteration) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = iterations_.find(iteration);
    PSBED_CHECK_MSG(it != iterations_.end(),
                    "iteration sealed with no commits");
    PSBED_CHECK_MSG(it->second.committed.CoversExactly(
                        Interval{0, num_items_}),
                    "iteration sealed without exactly-once coverage");
  }

  double ObjectiveOf(int64_t iteration) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = iterations_.find(iteration);
    return it == iterations_.end() ? 0.0 : it->second.objective;
  }

  int64_t TotalClampIncidents() const {
    std::lock_guard<std::mutex> lock(mu_);
    int64_t n = 0;
    for (const auto& [iter, st] : iterations_) n += st.clamp_incidents;
    return n;
  }

  // Frees bookkeeping for iterations <= bound (objectives are kept by the
  // caller before dropping).
  void DropThrough(int64_t bound) {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto it = iterations_.begin();
         it != iterations_.end() && it->first <= bound;) {
      it = iterations_.erase(it);
    }
  }

 private:
  struct IterationState {
    IntervalSet committed;
    double objective = 0.0;
    int64_t clamp_incidents = 0;
  };

  uint32_t num_items_;
  ps::ParameterTable* table_;
  mutable std::mutex mu_;
  std::map<int64_t, IterationState> iterations_;
};

}  // namespace psbed::mitigate
