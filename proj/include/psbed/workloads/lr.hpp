#pragma once

#include <cstdint>
#include <string>

#include "psbed/workloads/dataset.hpp"
#include "psbed/workloads/workload.hpp"

namespace psbed::workloads {

// SGD logistic regression on sparse examples. Parameter rows: key k in
// [0, dim) is the scalar weight of feature k (dimension == 1). One item ==
// one example. Objective: mean log-loss. Logits are clamped to +/-30 before
// the sigmoid; each clamp counts as an incident.
class LogisticRegression final : public Workload {
 public:
  LogisticRegression(ExampleSet data, double step);

  const WorkloadInfo& Info() const override { return info_; }
  std::string ObjectiveLabel() const override { return "logloss"; }
  void InitTable(ps::ParameterTable* table) override;
  void ProcessItems(const ValueSource& source, int64_t iteration,
                    std::span<const uint32_t> items,
                    ps::ChunkUpdates* out) const override;
  double FinalObjective(double summed) const override;

 private:
  ExampleSet data_;
  double step_;
  WorkloadInfo info_;
};

}  // namespace psbed::workloads
