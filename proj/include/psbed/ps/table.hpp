#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/ps/partition.hpp"

namespace psbed::ps {

// How update batches fold into per-iteration aggregates.
//  kArrival   — in commit order (what a real server would do; deterministic
//               under the virtual clock because commits are ordered events).
//  kCanonical — in ascending dataset-item order, regardless of which worker
//               produced the update. With item updates that are pure
//               functions of the read snapshot this makes the final table
//               independent of who executed what, bit for bit.
enum class CommitOrder { kArrival, kCanonical };

struct TableConfig {
  int num_shards = 1;
  int dimension = 1;        // values per key
  uint32_t capacity = 1;    // keys are [0, capacity)
  int retain_window = 0;    // staged iterations kept behind min clock (slack)
  CommitOrder order = CommitOrder::kArrival;
};

// Snapshot of the whole table at a staleness bound: iterations 1..bound
// folded over the initial state. Dense (capacity x dimension).
struct TableSnapshot {
  int dimension = 0;
  int64_t bound = 0;
  std::vector<double> data;

  std::span<const double> Row(Key key) const {
    return std::span<const double>(data).subspan(
        static_cast<size_t>(key) * dimension, dimension);
  }
};

// Sharded dense parameter store with bounded-staleness reads.
//
// Writes arrive as per-item staged deltas attributed to an iteration. An
// iteration seals once every registered worker has clocked past it (it can
// no longer receive updates); sealed aggregates older than the retain window
// merge into the base state. A read at bound B returns exactly
// base ⊕ aggregates(merged..B] — a pure function of B and committed history.
//
// Each shard serializes its own mutations behind a shard mutex; distinct
// shards admit concurrent readers/writers in real-clock runs. The table never
// blocks a caller: admission waits live entirely in the client.
class ParameterTable {
 public:
  explicit ParameterTable(const TableConfig& config);

  const TableConfig& config() const { return config_; }

  // --- setup -------------------------------------------------------------
  void RegisterWorker(int worker);
  // Direct write into the initial (bound-0) state; pre-run only.
  void InitValue(Key key, std::span<const double> value);

  // --- staged updates ----------------------------------------------------
  // Adds `delta` for `key`, attributed to `iteration` and produced while
  // processing dataset item `item` (canonical fold position).
  void StageItem(int64_t iteration, uint32_t item, Key key,
                 std::span<const double> delta);

  // --- clock -------------------------------------------------------------
  // Marks `worker` done with its next iteration; returns the new clock.
  // Sealing and base-merging happen here when the minimum clock advances.
  int64_t Clock(int worker);

  int64_t ClockOf(int worker) const;
  int64_t MinClock() const;
  std::vector<int64_t> ClockView() const;
  int64_t SealedThrough() const;

  // --- reads -------------------------------------------------------------
  // Value of `key` at staleness bound `bound` (0 = initial state).
  std::vector<double> ReadAtBound(Key key, int64_t bound) const;
  // Allocation-free variant for hot read paths; out.size() == dimension.
  void ReadAtBound(Key key, int64_t bound, std::span<double> out) const;
  void FillSnapshot(int64_t bound, TableSnapshot* out) const;

 private:
  struct Shard {
    mutable std::mutex mu;
    std::vector<double> base;                       // rows x dimension
    std::map<int64_t, std::vector<double>> staged;  // iteration -> dense delta
  };

  // Entry buffered for canonical folding (kept until the iteration seals).
  struct PendingEntry {
    uint32_t item;
    Key key;
    uint32_t val_offset;  // into pending values pool
  };
  struct PendingIteration {
    std::vector<PendingEntry> entries;
    std::vector<double> values;
  };

  int ShardRowCount(int shard) const {
    // keys k with k % S == shard are rows k / S
    return static_cast<int>(
        (config_.capacity + config_.num_shards - 1 - shard) /
        config_.num_shards);
  }

  void FoldIntoShardAggregate(int64_t iteration, Key key,
                              std::span<const double> delta);
  void SealLocked(int64_t iteration);
  void MergeThroughLocked(int64_t bound);

  TableConfig config_;
  std::vector<std::unique_ptr<Shard>> shards_;

  mutable std::mutex mu_;  // clocks, seal bookkeeping, canonical buffers
  std::vector<int64_t> clocks_;
  std::vector<bool> registered_;
  int64_t sealed_through_ = 0;
  int64_t merged_through_ = 0;
  std::map<int64_t, PendingIteration> pending_;  // canonical mode only
};

}  // namespace psbed::ps
