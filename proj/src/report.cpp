#include "psbed/runner/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "psbed/bench/records.hpp"
#include "psbed/common/error.hpp"

namespace psbed::runner {
namespace {

std::string Fixed3(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

std::string Sig6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

double ReductionPct(bench::Ticks baseline, bench::Ticks value) {
  if (baseline == 0) return 0.0;
  return (static_cast<double>(baseline) - static_cast<double>(value)) /
         static_cast<double>(baseline) * 100.0;
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string SummaryCsv(const std::vector<RunResult>& results,
                       const std::string& baseline_mode) {
  const RunResult* base = nullptr;
  for (const auto& r : results) {
    if (r.mode == baseline_mode) {
      base = &r;
      break;
    }
  }
  std::string out =
      "run_id,mode,pattern,avg_iter_ms,total_waste_ms,"
      "pct_vs_bsp_iter,pct_vs_bsp_waste\n";
  for (const auto& r : results) {
    out += r.run_id + ',' + r.mode + ',' + r.pattern + ',';
    out += Fixed3(r.AvgIterMs()) + ',';
    out += bench::TicksToMsString(r.waste_ticks) + ',';
    out += Fixed3(base ? ReductionPct(base->iter_time_ticks,
                                      r.iter_time_ticks)
                       : 0.0) +
           ',';
    out += Fixed3(base ? ReductionPct(base->waste_ticks, r.waste_ticks)
                       : 0.0) +
           '\n';
  }
  return out;
}

void WriteRunOutputs(const RunConfig& config, const RunResult& result,
                     const std::string& outdir) {
  const std::filesystem::path dir(outdir);
  std::filesystem::create_directories(dir);
  WriteFile(dir / "records.csv",
            bench::RecordsCsv(result.run_id, result.mode, result.pattern,
                              result.records));
  WriteFile(dir / "summary.csv", SummaryCsv({result}, result.mode));
  WriteFile(dir / "config.echo", EchoConfig(config));
}

void WriteCompareOutputs(const std::vector<RunResult>& results,
                         const std::string& baseline_mode,
                         const std::string& outdir) {
  bool found = false;
  for (const auto& r : results) found = found || r.mode == baseline_mode;
  if (!found) {
    throw ConfigError("no run has baseline mode \"" + baseline_mode + "\"");
  }
  const std::filesystem::path dir(outdir);
  std::filesystem::create_directories(dir);
  WriteFile(dir / "compare.csv", SummaryCsv(results, baseline_mode));
  std::string records;
  for (const auto& r : results) {
    std::string one =
        bench::RecordsCsv(r.run_id, r.mode, r.pattern, r.records);
    if (!records.empty()) {
      one.erase(0, one.find('\n') + 1);  // keep a single header
    }
    records += one;
  }
  WriteFile(dir / "records.csv", records);
}

std::string SummaryLine(const RunResult& r) {
  std::string line = r.run_id + ": mode=" + r.mode + " pattern=" + r.pattern;
  line += " avg_iter_ms=" + Fixed3(r.AvgIterMs());
  line += " trailing_avg_iter_ms=" + Fixed3(r.TrailingAvgIterMs());
  line += " total_waste_ms=" + bench::TicksToMsString(r.waste_ticks);
  line += " max_clock_gap=" + std::to_string(r.max_clock_gap);
  if (!r.objective.empty()) {
    line += " final_" + r.objective_label + "=" +
            Sig6(r.objective.back());
  }
  return line;
}

}  // namespace psbed::runner
