#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "psbed/workloads/dataset.hpp"
#include "psbed/workloads/workload.hpp"

namespace psbed::workloads {

// Collapsed Gibbs sampling for LDA. One item == one document. Parameter
// rows: key w in [0, vocab) holds word w's per-topic counts, key vocab
// holds the per-topic totals; dimension == num_topics. Token assignments
// live outside the table as per-token state; each document's sweep emits
// the exact count deltas implied by its reassignments plus a state write
// per token, so folding every committed delta reproduces the counts of the
// final assignments bit-for-bit (all deltas are integer-valued).
//
// Document-local counts are derived from the item's own state (exact);
// word and totals counts are read at the caller's staleness bound and may
// lag, so the per-token exclusion clamps at zero and counts an incident
// whenever it would have gone negative. Topic draws use a counter-based
// generator keyed by (seed, iteration, token slot): a token's draw never
// depends on which thread executes it.
//
// The objective is the mean log-probability of each token's sampled
// assignment under its own conditional: about -log(num_topics) while
// assignments are random, approaching 0 as the sampler concentrates.
class CollapsedGibbsLda final : public Workload {
 public:
  CollapsedGibbsLda(Corpus corpus, double alpha, double beta, uint64_t seed);

  const WorkloadInfo& Info() const override { return info_; }
  std::string ObjectiveLabel() const override { return "assign_logprob"; }
  void InitTable(ps::ParameterTable* table) override;
  void ProcessItems(const ValueSource& source, int64_t iteration,
                    std::span<const uint32_t> items,
                    ps::ChunkUpdates* out) const override;
  void WriteState(uint64_t slot, uint32_t value) override;
  double FinalObjective(double summed) const override;

  // Current assignment of one token slot (test hook).
  uint32_t AssignmentOf(uint64_t slot) const;
  const Corpus& corpus() const { return corpus_; }

 private:
  Corpus corpus_;
  double alpha_;
  double beta_;
  uint64_t seed_;
  int num_topics_;
  WorkloadInfo info_;
  // Per-token topic assignment, indexed by slot. Atomic so a raced loser's
  // reads never tear against the winner's committed writes; accepted items
  // are never raced, so accepted reads are exact.
  std::unique_ptr<std::atomic<uint32_t>[]> state_;
};

}  // namespace psbed::workloads
