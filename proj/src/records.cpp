#include "psbed/bench/records.hpp"

#include <algorithm>
#include <cstdio>

#include "psbed/common/error.hpp"

namespace psbed::bench {

namespace {

// Sorts a copy by (iteration, worker) and verifies the grid is complete:
// every (worker, iteration) pair appears exactly once.
std::vector<IterationRecord> SortedCompleteGrid(
    const std::vector<IterationRecord>& records, int num_workers,
    int64_t num_iterations) {
  PSBED_CHECK_MSG(
      records.size() == static_cast<size_t>(num_workers) * num_iterations,
      "incomplete timing data: record count does not match workers x iterations");
  std::vector<IterationRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(),
            [](const IterationRecord& a, const IterationRecord& b) {
              if (a.iteration != b.iteration) return a.iteration < b.iteration;
              return a.worker < b.worker;
            });
  for (int64_t it = 0; it < num_iterations; ++it) {
    for (int w = 0; w < num_workers; ++w) {
      const IterationRecord& r = sorted[it * num_workers + w];
      PSBED_CHECK_MSG(r.iteration == it + 1 && r.worker == w,
                      "incomplete timing data: missing worker-iteration record");
    }
  }
  return sorted;
}

}  // namespace

Ticks ComputeIterationTime(const std::vector<IterationRecord>& records,
                           int num_workers, int64_t num_iterations) {
  PSBED_CHECK(num_workers > 0 && num_iterations >= 0);
  auto sorted = SortedCompleteGrid(records, num_workers, num_iterations);
  Ticks total = 0;
  for (int64_t it = 0; it < num_iterations; ++it) {
    Ticks max_comp = 0;
    Ticks max_comm = 0;
    for (int w = 0; w < num_workers; ++w) {
      const IterationRecord& r = sorted[it * num_workers + w];
      max_comp = std::max(max_comp, r.comp_ticks);
      max_comm = std::max(max_comm, r.comm_ticks);
    }
    total += max_comp + max_comm;
  }
  return total;
}

Ticks ComputeWastedTime(const std::vector<IterationRecord>& records) {
  Ticks total = 0;
  for (const auto& r : records) {
    PSBED_CHECK_MSG(r.wait_ticks >= 0, "negative wait duration");
    total += r.wait_ticks;
  }
  return total;
}

std::string TicksToMsString(Ticks t) {
  char buf[40];
  const char* sign = t < 0 ? "-" : "";
  const Ticks a = t < 0 ? -t : t;
  std::snprintf(buf, sizeof(buf), "%s%lld.%03lld", sign,
                static_cast<long long>(a / kTicksPerMs),
                static_cast<long long>(a % kTicksPerMs));
  return buf;
}

std::string RecordsCsv(const std::string& run_id, const std::string& mode,
                       const std::string& pattern,
                       const std::vector<IterationRecord>& records) {
  std::vector<IterationRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(),
            [](const IterationRecord& a, const IterationRecord& b) {
              if (a.iteration != b.iteration) return a.iteration < b.iteration;
              return a.worker < b.worker;
            });
  std::string out = "run_id,mode,pattern,iteration,worker,comp_ms,comm_ms,wait_ms\n";
  for (const auto& r : sorted) {
    out += run_id;
    out += ',';
    out += mode;
    out += ',';
    out += pattern;
    out += ',';
    out += std::to_string(r.iteration);
    out += ',';
    out += std::to_string(r.worker);
    out += ',';
    out += TicksToMsString(r.comp_ticks);
    out += ',';
    out += TicksToMsString(r.comm_ticks);
    out += ',';
    out += TicksToMsString(r.wait_ticks);
    out += '\n';
  }
  return out;
}

}  // namespace psbed::bench
