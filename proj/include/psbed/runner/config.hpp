#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "psbed/bench/clock.hpp"
#include "psbed/common/error.hpp"
#include "psbed/consistency/policy.hpp"
#include "psbed/inject/straggler.hpp"
#include "psbed/ps/table.hpp"
#include "psbed/workloads/workload.hpp"

namespace psbed::runner {

struct MitigationConfig {
  bool reassignment = false;
  bool speculation = false;
  double detect_threshold = 0.25;          // progress gap that marks a straggler
  double shed_fraction = 0.25;             // tail share a helper claims
  double progress_broadcast_interval = 0.10;  // chunk size as a range fraction
  double clone_lag_threshold = 0.3;        // iterations behind the median
  int max_clones = 2;

  void Validate() const;
};

struct CostConfig {
  double comm_base_us = 500.0;     // per-flush round trip
  double comm_per_item_us = 0.4;   // per flushed item
  double control_latency_us = 0.0; // progress/clock/protocol message latency

  void Validate() const;
};

struct WorkloadConfig {
  std::string name = "mf";    // "mf" | "lr" | "lda"
  double item_cost_us = 0.0;  // 0 = workload default

  // mf
  uint32_t rows = 1000;
  uint32_t cols = 1000;
  int rank = 10;
  double density = 0.05;
  double noise = 0.1;
  double step = 0.005;
  double reg = 0.05;

  // lr (shares `step`)
  uint32_t examples = 50000;
  uint32_t dim = 1000;
  int nnz = 10;
  double margin = 0.1;

  // lda
  uint32_t docs = 2000;
  int doc_len = 100;
  uint32_t vocab = 5000;
  int topics = 10;
  double alpha = 0.1;
  double beta = 0.01;

  void Validate() const;
};

struct RunConfig {
  std::string run_id;  // empty = "<mode>-<pattern>"
  uint64_t seed = 1;
  int workers = 8;
  int64_t iterations = 20;
  bench::ClockMode clock_mode = bench::ClockMode::kVirtual;
  int shards = 0;  // 0 = one per worker
  ps::CommitOrder commit_order = ps::CommitOrder::kCanonical;

  consistency::SyncPolicy sync;  // mitigation flags are folded in
  inject::StragglerConfig straggler;
  MitigationConfig mitigation;
  WorkloadConfig workload;
  CostConfig cost;

  void Validate() const;

  std::string EffectiveRunId() const;
  // "ideal" when injection is disabled, the configured pattern otherwise.
  std::string PatternLabel() const;
};

// Strict parse: unknown keys and type mismatches anywhere are ConfigErrors.
RunConfig ParseRunConfig(const std::string& text);
RunConfig LoadRunConfigFile(const std::string& path);

// Canonical JSON rendering of every effective value (pretty, sorted keys).
std::string EchoConfig(const RunConfig& config);

// Returns `text` with the value at `path` replaced (sections created as
// needed). `path` is dotted ("straggler.alpha", "sync.slack") or a bare key,
// which must resolve uniquely across the top level and all sections; a bare
// key present nowhere is created at the top level (the strict parse still
// rejects unknown keys). `value` is parsed as JSON when it is valid JSON,
// as a string otherwise.
std::string ApplyConfigOverride(const std::string& text,
                                const std::string& path,
                                const std::string& value);

// Builds the configured workload, generating its dataset from the run seed.
std::unique_ptr<workloads::Workload> MakeWorkload(const WorkloadConfig& wl,
                                                  uint64_t seed);

}  // namespace psbed::runner
