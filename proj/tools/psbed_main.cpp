#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "psbed/bench/records.hpp"
#include "psbed/common/error.hpp"
#include "psbed/runner/config.hpp"
#include "psbed/runner/engine.hpp"
#include "psbed/runner/report.hpp"

namespace {

using psbed::runner::RunConfig;
using psbed::runner::RunResult;

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw psbed::ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CommonFlags {
  std::string out;
  std::string clock;
  uint64_t seed = 0;
  bool seed_set = false;
  bool verbose = false;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags* f) {
  cmd->add_option("--out", f->out, "Directory for records/summary outputs");
  cmd->add_option("--clock", f->clock, "Clock mode override")
      ->check(CLI::IsMember({"virtual", "real"}));
  cmd->add_option("--seed", f->seed, "Seed override")
      ->each([f](const std::string&) { f->seed_set = true; });
  cmd->add_flag("--verbose", f->verbose, "Per-iteration detail on stdout");
}

std::string LoadWithFlags(const std::string& path, const CommonFlags& f) {
  std::string text = Slurp(path);
  if (f.seed_set) {
    text = psbed::runner::ApplyConfigOverride(text, "seed",
                                              std::to_string(f.seed));
  }
  if (!f.clock.empty()) {
    text = psbed::runner::ApplyConfigOverride(text, "clock_mode", f.clock);
  }
  return text;
}

void PrintVerbose(const RunResult& r) {
  std::vector<psbed::bench::Ticks> comp(r.iterations, 0);
  std::vector<psbed::bench::Ticks> comm(r.iterations, 0);
  std::vector<psbed::bench::Ticks> wait(r.iterations, 0);
  for (const auto& rec : r.records) {
    auto& c = comp[rec.iteration - 1];
    auto& m = comm[rec.iteration - 1];
    c = std::max(c, rec.comp_ticks);
    m = std::max(m, rec.comm_ticks);
    wait[rec.iteration - 1] += rec.wait_ticks;
  }
  for (int64_t i = 0; i < r.iterations; ++i) {
    std::printf("  iter %3lld  max_comp_ms=%s  max_comm_ms=%s  "
                "wait_ms_total=%s  %s=%.6g\n",
                static_cast<long long>(i + 1),
                psbed::bench::TicksToMsString(comp[i]).c_str(),
                psbed::bench::TicksToMsString(comm[i]).c_str(),
                psbed::bench::TicksToMsString(wait[i]).c_str(),
                r.objective_label.c_str(), r.objective[i]);
  }
}

RunResult RunOne(const RunConfig& cfg, const std::string& outdir,
                 bool verbose) {
  const RunResult res = outdir.empty()
                            ? psbed::runner::RunExperiment(cfg)
                            : psbed::runner::RunExperiment(cfg, outdir);
  std::printf("%s\n", psbed::runner::SummaryLine(res).c_str());
  if (verbose) PrintVerbose(res);
  return res;
}

int DoRun(const std::string& config_path, const CommonFlags& f) {
  const RunConfig cfg =
      psbed::runner::ParseRunConfig(LoadWithFlags(config_path, f));
  const RunResult res = RunOne(cfg, f.out, f.verbose);
  if (!f.out.empty()) {
    psbed::runner::WriteRunOutputs(cfg, res, f.out);
    std::printf("wrote %s/{records.csv,summary.csv,config.echo}\n",
                f.out.c_str());
  }
  return 0;
}

int DoCompare(const std::vector<std::string>& config_paths,
              const std::string& baseline, const CommonFlags& f) {
  std::vector<RunResult> results;
  results.reserve(config_paths.size());
  for (const auto& path : config_paths) {
    const RunConfig cfg =
        psbed::runner::ParseRunConfig(LoadWithFlags(path, f));
    // Per-run subdirectory so a failed run still flushes its evidence.
    const std::string run_out =
        f.out.empty() ? "" : f.out + "/" + cfg.EffectiveRunId();
    results.push_back(RunOne(cfg, run_out, f.verbose));
  }
  if (f.out.empty()) {
    std::printf("%s", psbed::runner::SummaryCsv(results, baseline).c_str());
  } else {
    psbed::runner::WriteCompareOutputs(results, baseline, f.out);
    std::printf("wrote %s/{compare.csv,records.csv}\n", f.out.c_str());
  }
  return 0;
}

int DoSweep(const std::string& config_path, const std::string& param,
            const std::vector<std::string>& values,
            const std::string& baseline, const CommonFlags& f) {
  const std::string base_text = LoadWithFlags(config_path, f);
  std::vector<RunResult> results;
  results.reserve(values.size());
  for (const auto& value : values) {
    const std::string text =
        psbed::runner::ApplyConfigOverride(base_text, param, value);
    RunConfig cfg = psbed::runner::ParseRunConfig(text);
    cfg.run_id = cfg.EffectiveRunId() + "-" + value;
    const std::string run_out =
        f.out.empty() ? "" : f.out + "/" + cfg.run_id;
    const RunResult res = RunOne(cfg, run_out, f.verbose);
    if (!f.out.empty()) {
      psbed::runner::WriteRunOutputs(cfg, res, run_out);
    }
    results.push_back(res);
  }
  if (f.out.empty()) {
    std::printf("%s", psbed::runner::SummaryCsv(results, baseline).c_str());
  } else {
    std::ofstream sweep(std::filesystem::path(f.out) / "sweep.csv",
                        std::ios::binary);
    if (!sweep) throw psbed::ConfigError("cannot write " + f.out);
    sweep << psbed::runner::SummaryCsv(results, baseline);
    std::printf("wrote %s/sweep.csv\n", f.out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Parameter-server straggler testbed: deterministic worker/clock "
      "simulation with consistency, injection and mitigation knobs"};
  app.require_subcommand(1);

  std::string run_config;
  CommonFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "Execute one configuration");
  run_cmd->add_option("config", run_config, "Run config (JSON)")->required();
  AddCommonFlags(run_cmd, &run_flags);

  std::vector<std::string> cmp_configs;
  std::string cmp_baseline = "bsp";
  CommonFlags cmp_flags;
  CLI::App* cmp_cmd =
      app.add_subcommand("compare", "Run several configurations and diff "
                                    "them against a baseline mode");
  cmp_cmd->add_option("configs", cmp_configs, "Run configs (JSON)")
      ->required()
      ->expected(-1);
  cmp_cmd->add_option("--baseline", cmp_baseline,
                      "Mode name percentages compare against");
  AddCommonFlags(cmp_cmd, &cmp_flags);

  std::string sweep_config;
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  std::string sweep_baseline = "bsp";
  CommonFlags sweep_flags;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Run one configuration once per value of a parameter");
  sweep_cmd->add_option("config", sweep_config, "Run config (JSON)")
      ->required();
  sweep_cmd
      ->add_option("--param", sweep_param,
                   "Config key to sweep (dotted path or unique bare key)")
      ->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--baseline", sweep_baseline,
                        "Mode name percentages compare against");
  AddCommonFlags(sweep_cmd, &sweep_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return DoRun(run_config, run_flags);
    if (cmp_cmd->parsed()) {
      return DoCompare(cmp_configs, cmp_baseline, cmp_flags);
    }
    return DoSweep(sweep_config, sweep_param, sweep_values, sweep_baseline,
                   sweep_flags);
  } catch (const psbed::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "filesystem error: %s\n", e.what());
    return 2;
  } catch (const psbed::InvariantError& e) {
    std::fprintf(stderr, "invariant violated: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
