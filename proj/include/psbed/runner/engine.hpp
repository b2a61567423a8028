#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psbed/bench/records.hpp"
#include "psbed/ps/table.hpp"
#include "psbed/runner/config.hpp"

namespace psbed::runner {

// Everything one experiment produces: timing records, derived aggregates,
// per-iteration objective values and the final parameter state.
struct RunResult {
  std::string run_id;
  std::string mode;     // sync policy name, e.g. "bsp", "ssp-rr"
  std::string pattern;  // straggler pattern label, "ideal" when disabled
  int workers = 0;
  int64_t iterations = 0;

  std::vector<bench::IterationRecord> records;  // (iteration, worker) order
  bench::Ticks wall_ticks = 0;       // full run, init to last clock
  bench::Ticks iter_time_ticks = 0;  // sum of per-iteration max comp + comm
  bench::Ticks waste_ticks = 0;      // sum of admission waits
  int64_t max_clock_gap = 0;         // largest observed max-min clock spread

  std::vector<double> objective;  // per iteration, 1-based shifted to [0]
  std::string objective_label;
  int64_t clamp_incidents = 0;

  ps::TableSnapshot final_table;  // state at bound = iterations

  double AvgIterMs() const {
    return static_cast<double>(iter_time_ticks) /
           (static_cast<double>(iterations) * 1000.0);
  }

  // Mean per-iteration time with the first min(5, iterations - 1) warm-up
  // iterations dropped (20 iterations -> mean of the last 15).
  double TrailingAvgIterMs() const;
};

// Runs one experiment to completion. Throws ConfigError for unusable
// configurations and InvariantError when a run breaks its own guarantees.
RunResult RunExperiment(const RunConfig& config);

// Same, but flushes the records collected so far to <outdir>/records.csv
// before rethrowing an InvariantError, so a failed run leaves evidence.
RunResult RunExperiment(const RunConfig& config, const std::string& outdir);

}  // namespace psbed::runner
