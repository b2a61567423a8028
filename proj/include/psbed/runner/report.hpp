#pragma once

#include <string>
#include <vector>

#include "psbed/runner/config.hpp"
#include "psbed/runner/engine.hpp"

namespace psbed::runner {

// summary.csv / compare.csv content, one row per run:
//
//   run_id,mode,pattern,avg_iter_ms,total_waste_ms,
//   pct_vs_bsp_iter,pct_vs_bsp_waste
//
// Percentages are reductions relative to the first run whose mode equals
// `baseline_mode`: (baseline - run) / baseline x 100. Without a baseline
// row, or when the baseline value is 0, a percentage prints as 0.000.
std::string SummaryCsv(const std::vector<RunResult>& results,
                       const std::string& baseline_mode);

// Writes records.csv, summary.csv (the run against itself, so percentages
// are 0.000) and config.echo into `outdir`, creating it if needed.
void WriteRunOutputs(const RunConfig& config, const RunResult& result,
                     const std::string& outdir);

// Writes compare.csv and a concatenated records.csv for several runs.
// Throws ConfigError when no run's mode matches `baseline_mode`.
void WriteCompareOutputs(const std::vector<RunResult>& results,
                         const std::string& baseline_mode,
                         const std::string& outdir);

// One human-oriented line per run for terminal output.
std::string SummaryLine(const RunResult& result);

}  // namespace psbed::runner
