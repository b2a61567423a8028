#pragma once

#include <cstdint>
#include <string>

#include "psbed/workloads/dataset.hpp"
#include "psbed/workloads/workload.hpp"

namespace psbed::workloads {

// SGD matrix factorization on an observed ratings matrix. Parameter rows:
// key i in [0, rows) is the left factor of row i, key rows + j is the right
// factor of column j; dimension == rank. One item == one observed rating.
// Objective: RMSE over the observed cells.
class MatrixFactorization final : public Workload {
 public:
  MatrixFactorization(RatingsMatrix data, int rank, double step, double reg,
                      uint64_t init_seed);

  const WorkloadInfo& Info() const override { return info_; }
  std::string ObjectiveLabel() const override { return "rmse"; }
  void InitTable(ps::ParameterTable* table) override;
  void ProcessItems(const ValueSource& source, int64_t iteration,
                    std::span<const uint32_t> items,
                    ps::ChunkUpdates* out) const override;
  double FinalObjective(double summed) const override;

 private:
  RatingsMatrix data_;
  int rank_;
  double step_;
  double reg_;
  uint64_t init_seed_;
  WorkloadInfo info_;
};

}  // namespace psbed::workloads
