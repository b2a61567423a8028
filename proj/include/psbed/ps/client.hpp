#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "psbed/consistency/policy.hpp"
#include "psbed/ps/table.hpp"

namespace psbed::ps {

// Per-worker access handle implementing the three-call client API:
//
//   Get(key)    — blocks until the sync policy admits this worker's clock,
//                 then reads at the staleness bound (clock - slack). The
//                 bound is pinned on the first admitted read of an iteration
//                 so every read within the iteration sees the same state.
//   Add(key,d)  — buffers an element-wise delta locally.
//   Clock()     — stages all buffered Adds for the just-finished iteration,
//                 then advances this worker's clock by exactly one.
//
// Blocking is delegated to `block_fn` (the harness parks the worker there
// and wakes it on clock broadcasts); the returned wait spans are measured by
// the caller. A client with no block_fn fails hard instead of spinning.
class TableClient {
 public:
  using BlockFn = std::function<void()>;

  TableClient(ParameterTable& table, int worker,
              const consistency::SyncPolicy& policy, BlockFn block_fn = {})
      : table_(&table),
        worker_(worker),
        policy_(policy),
        block_fn_(std::move(block_fn)) {
    policy_.Validate();
    table_->RegisterWorker(worker);
  }

  int worker() const { return worker_; }
  int64_t clock() const { return table_->ClockOf(worker_); }

  // True iff the admission rule currently lets this worker read.
  bool Admitted() const {
    return consistency::MayProceed(clock(), table_->MinClock(), policy_);
  }

  // Blocks (via block_fn) until admitted; returns the number of block calls
  // (0 when admission was already open). Pins the read bound.
  int EnsureAdmitted() {
    int blocks = 0;
    while (!Admitted()) {
      PSBED_CHECK_MSG(block_fn_ != nullptr,
                      "worker blocked on admission with no scheduler hookup");
      block_fn_();
      ++blocks;
    }
    if (!bound_pinned_) {
      pinned_bound_ = ReadBoundFor(clock());
      bound_pinned_ = true;
    }
    return blocks;
  }

  int64_t ReadBoundFor(int64_t worker_clock) const {
    const int64_t b = worker_clock - policy_.slack;
    return b < 0 ? 0 : b;
  }

  // Pinned staleness bound for the current iteration (requires admission).
  int64_t PinnedBound() {
    EnsureAdmitted();
    return pinned_bound_;
  }

  std::vector<double> Get(Key key) {
    EnsureAdmitted();
    return table_->ReadAtBound(key, pinned_bound_);
  }

  void GetSnapshot(TableSnapshot* out) {
    EnsureAdmitted();
    table_->FillSnapshot(pinned_bound_, out);
  }

  void Add(Key key, std::span<const double> delta) {
    PSBED_CHECK_MSG(static_cast<int>(delta.size()) ==
                        table_->config().dimension,
                    "delta dimension mismatch");
    buffer_keys_.push_back(key);
    buffer_vals_.insert(buffer_vals_.end(), delta.begin(), delta.end());
  }

  size_t BufferedAdds() const { return buffer_keys_.size(); }

  // Flush + clock. Buffered adds stage for the iteration being completed
  // (clock + 1) in buffer order, folded under this worker's id.
  int64_t Clock() {
    const int64_t completing = clock() + 1;
    const int dim = table_->config().dimension;
    for (size_t i = 0; i < buffer_keys_.size(); ++i) {
      table_->StageItem(completing, static_cast<uint32_t>(worker_),
                        buffer_keys_[i],
                        std::span<const double>(buffer_vals_)
                            .subspan(i * dim, dim));
    }
    buffer_keys_.clear();
    buffer_vals_.clear();
    bound_pinned_ = false;
    return table_->Clock(worker_);
  }

  // Engine path: chunk updates are staged through the commit gate before the
  // clock call; this clocks without touching the (empty) local buffer.
  int64_t ClockNoFlush() {
    PSBED_CHECK_MSG(buffer_keys_.empty(),
                    "ClockNoFlush with locally buffered adds");
    bound_pinned_ = false;
    return table_->Clock(worker_);
  }

  const consistency::SyncPolicy& policy() const { return policy_; }

 private:
  ParameterTable* table_;
  int worker_;
  consistency::SyncPolicy policy_;
  BlockFn block_fn_;
  std::vector<Key> buffer_keys_;
  std::vector<double> buffer_vals_;
  int64_t pinned_bound_ = 0;
  bool bound_pinned_ = false;
};

}  // namespace psbed::ps
