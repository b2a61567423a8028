#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "psbed/ps/table.hpp"
#include "psbed/ps/updates.hpp"

namespace psbed::workloads {

// Where a kernel reads parameter rows from. Implementations pin a staleness
// bound so a chunk's reads are a pure function of the caller's clock, never
// of which thread happens to execute the chunk.
class ValueSource {
 public:
  virtual ~ValueSource() = default;
  // Fills `out` (size == table dimension) with the row for `key`.
  virtual void Read(ps::Key key, std::span<double> out) const = 0;
};

// ValueSource over a parameter table at a fixed staleness bound.
class TableBoundSource final : public ValueSource {
 public:
  TableBoundSource(const ps::ParameterTable& table, int64_t bound)
      : table_(&table), bound_(bound) {}

  void Read(ps::Key key, std::span<double> out) const override {
    table_->ReadAtBound(key, bound_, out);
  }

  int64_t bound() const { return bound_; }

 private:
  const ps::ParameterTable* table_;
  int64_t bound_;
};

struct WorkloadInfo {
  uint32_t num_items = 0;      // unit of work partitioning and commit
  ps::Key table_capacity = 0;  // parameter rows the table must hold
  int dimension = 0;           // values per row
  double default_item_cost_us = 0.0;
};

// A data-parallel iterative workload. Items are processed in contiguous
// chunks; each chunk reads parameters through a ValueSource and appends one
// BeginItem group per item (additive updates, an objective contribution,
// and optional opaque state writes applied only if the item commits).
class Workload {
 public:
  virtual ~Workload() = default;

  virtual const WorkloadInfo& Info() const = 0;
  virtual std::string ObjectiveLabel() const = 0;

  // Seeds initial parameter values; runs once before any worker starts.
  virtual void InitTable(ps::ParameterTable* table) = 0;

  // Processes `items` for `iteration`. Must be safe to call concurrently
  // from different threads (shared state, if any, is synchronized
  // internally), and its output for an item the commit gate accepts must
  // depend only on the source's bound and the item's own committed history.
  virtual void ProcessItems(const ValueSource& source, int64_t iteration,
                            std::span<const uint32_t> items,
                            ps::ChunkUpdates* out) const = 0;

  // Applies one committed state write (wired into the commit gate's sink);
  // no-op for stateless workloads.
  virtual void WriteState(uint64_t /*slot*/, uint32_t /*value*/) {}

  // Turns an iteration's summed per-item contributions into the reported
  // objective scalar (e.g. RMSE from a sum of squared errors).
  virtual double FinalObjective(double summed) const = 0;
};

}  // namespace psbed::workloads
