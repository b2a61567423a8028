#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psbed/bench/clock.hpp"

namespace psbed::bench {

// One worker-iteration timing record. comp covers useful compute plus any
// injected delay (a slow worker is just slow compute); comm covers the
// get/flush message exchanges; wait covers time blocked on admission.
// Wall time of the iteration equals comp + comm + wait to within one tick.
struct IterationRecord {
  int64_t iteration = 0;  // 1-based
  int worker = 0;
  Ticks comp_ticks = 0;
  Ticks comm_ticks = 0;
  Ticks wait_ticks = 0;
};

// Sum over iterations of (max worker compute + max worker comm): the
// study's estimate of accumulated iteration time under barrier coupling.
// Requires a record for every (worker, iteration) pair; anything missing or
// duplicated is an invariant error.
Ticks ComputeIterationTime(const std::vector<IterationRecord>& records,
                           int num_workers, int64_t num_iterations);

// Sum of wait_ticks over all workers and iterations: accumulated time wasted
// blocked on synchronization.
Ticks ComputeWastedTime(const std::vector<IterationRecord>& records);

// Exact decimal formatting of ticks as milliseconds with 3 decimals
// (1 tick = 1 us, so the conversion is lossless).
std::string TicksToMsString(Ticks t);

// records.csv content: header + one row per record, in (iteration, worker)
// order. run_id/mode/pattern label every row so concatenated files stay
// self-describing (long format).
std::string RecordsCsv(const std::string& run_id, const std::string& mode,
                       const std::string& pattern,
                       const std::vector<IterationRecord>& records);

}  // namespace psbed::bench
