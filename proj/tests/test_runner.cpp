#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "psbed/bench/records.hpp"
#include "psbed/common/error.hpp"
#include "psbed/runner/config.hpp"
#include "psbed/runner/engine.hpp"
#include "psbed/runner/report.hpp"

using psbed::ConfigError;
using psbed::bench::IterationRecord;
using psbed::bench::RecordsCsv;
using psbed::runner::ApplyConfigOverride;
using psbed::runner::EchoConfig;
using psbed::runner::MakeWorkload;
using psbed::runner::ParseRunConfig;
using psbed::runner::RunConfig;
using psbed::runner::RunExperiment;
using psbed::runner::RunResult;
using psbed::runner::SummaryCsv;
using psbed::runner::SummaryLine;
using psbed::runner::WorkloadConfig;
using psbed::runner::WriteCompareOutputs;
using psbed::runner::WriteRunOutputs;

namespace {

// Small fast experiment: 240 items over 4 workers, virtual clock.
std::string SmallMf(const std::string& extra = "") {
  std::string text = R"({
    "workers": 4, "iterations": 8,
    "workload": {"name": "mf", "rows": 40, "cols": 30, "rank": 3,
                 "density": 0.2, "noise": 0.1, "step": 0.02, "reg": 0.001})";
  if (!extra.empty()) text += ", " + extra;
  return text + "}";
}

RunConfig Parse(const std::string& text) { return ParseRunConfig(text); }

}  // namespace

// ------------------------------------------------------------------ config

TEST_CASE("an empty config object yields the documented defaults") {
  const RunConfig c = Parse("{}");
  CHECK(c.seed == 1);
  CHECK(c.workers == 8);
  CHECK(c.iterations == 20);
  CHECK(c.clock_mode == psbed::bench::ClockMode::kVirtual);
  CHECK(c.shards == 0);
  CHECK(c.commit_order == psbed::ps::CommitOrder::kCanonical);
  CHECK(c.sync.mode == psbed::consistency::SyncMode::kBsp);
  CHECK(c.sync.slack == 0);
  CHECK_FALSE(c.straggler.enabled);
  CHECK(c.straggler.seed == 1);
  CHECK_FALSE(c.mitigation.reassignment);
  CHECK_FALSE(c.mitigation.speculation);
  CHECK(c.workload.name == "mf");
  CHECK(c.PatternLabel() == "ideal");
  CHECK(c.EffectiveRunId() == "bsp-ideal");
}

TEST_CASE("unknown keys, bad types and bad enums are config errors") {
  CHECK_THROWS_WITH_AS(Parse(R"({"wrokers": 4})"),
                       "unknown key \"wrokers\" in config", ConfigError);
  CHECK_THROWS_WITH_AS(Parse(R"({"sync": {"mode": "bsp", "slck": 1}})"),
                       "unknown key \"slck\" in sync", ConfigError);
  CHECK_THROWS_WITH_AS(Parse(R"({"workers": "eight"})"),
                       "bad value for \"workers\" in config", ConfigError);
  CHECK_THROWS_AS(Parse("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(Parse("not json at all"), ConfigError);
  CHECK_THROWS_AS(Parse(R"({"sync": {"mode": "turbo"}})"), ConfigError);
  CHECK_THROWS_AS(Parse(R"({"clock_mode": "sundial"})"), ConfigError);
  CHECK_THROWS_AS(Parse(R"({"commit_order": "chaos"})"), ConfigError);
  CHECK_THROWS_AS(Parse(R"({"workload": {"name": "svm"}})"), ConfigError);
  // Workload keys are checked against the named workload, not the union.
  CHECK_THROWS_AS(Parse(R"({"workload": {"name": "lr", "rows": 5}})"),
                  ConfigError);
}

TEST_CASE("impossible setups are rejected as config errors") {
  CHECK_THROWS_AS(Parse(R"({"workers": 0})"), ConfigError);
  CHECK_THROWS_AS(Parse(R"({"iterations": 0})"), ConfigError);
  CHECK_THROWS_AS(Parse(R"({"sync": {"mode": "bsp", "slack": 1}})"),
                  ConfigError);
  CHECK_THROWS_AS(Parse(R"({"sync": {"mode": "ssp", "slack": -1}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      Parse(R"({"straggler": {"enabled": true, "pattern": "persistent"}})"),
      ConfigError);
  CHECK_THROWS_AS(
      Parse(R"({"workers": 4, "straggler": {"enabled": true,
            "pattern": "persistent", "persistent_workers": [4]}})"),
      ConfigError);
  CHECK_THROWS_AS(
      Parse(R"({"workload": {"name": "lr", "dim": 5, "nnz": 6}})"),
      ConfigError);
  CHECK_THROWS_AS(Parse(R"({"mitigation": {"shed_fraction": 0.6}})"),
                  ConfigError);
  CHECK_THROWS_AS(Parse(R"({"straggler": {"enabled": true,
                  "pattern": "power_law", "alpha": 1.0}})"),
                  ConfigError);
}

TEST_CASE("ssp defaults to slack 3 and bsp to slack 0") {
  CHECK(Parse(R"({"sync": {"mode": "ssp"}})").sync.slack == 3);
  CHECK(Parse(R"({"sync": {"mode": "bsp"}})").sync.slack == 0);
  CHECK(Parse(R"({"sync": {"mode": "ssp", "slack": 7}})").sync.slack == 7);
}

TEST_CASE("the straggler seed follows the run seed unless pinned") {
  CHECK(Parse(R"({"seed": 42})").straggler.seed == 42);
  CHECK(Parse(R"({"seed": 42, "straggler": {"pattern": "slow_worker"}})")
            .straggler.seed == 42);
  CHECK(Parse(R"({"seed": 42, "straggler": {"seed": 7}})").straggler.seed ==
        7);
}

TEST_CASE("run ids fold mode, mitigation flags and pattern") {
  auto c = Parse(R"({"sync": {"mode": "ssp"},
                     "mitigation": {"reassignment": true},
                     "straggler": {"enabled": true,
                                   "pattern": "slow_worker"}})");
  CHECK(c.PatternLabel() == "slow_worker");
  CHECK(c.EffectiveRunId() == "ssp-rr-slow_worker");
  CHECK(c.sync.reassignment);  // folded into the policy at parse time

  c = Parse(R"({"mitigation": {"speculation": true}})");
  CHECK(c.EffectiveRunId() == "bsp-spec-ideal");

  c = Parse(R"({"run_id": "my-run"})");
  CHECK(c.EffectiveRunId() == "my-run");

  // A disabled pattern stays "ideal" even if a pattern name is set.
  c = Parse(R"({"straggler": {"pattern": "power_law"}})");
  CHECK(c.PatternLabel() == "ideal");
}

TEST_CASE("echoed config reparses to the same echo") {
  const auto c = Parse(SmallMf(
      R"("seed": 9, "sync": {"mode": "ssp", "slack": 2},
         "straggler": {"enabled": true, "pattern": "slow_worker",
                       "probability": 0.3, "delay_percent": 100},
         "mitigation": {"reassignment": true})"));
  const std::string echo = EchoConfig(c);
  CHECK(EchoConfig(Parse(echo)) == echo);

  const auto j = nlohmann::json::parse(echo);
  CHECK(j["run_id"] == "ssp-rr-slow_worker");
  CHECK(j["shards"] == 4);  // 0 means one per worker
  CHECK(j["workers"] == 4);
  CHECK(j["sync"]["slack"] == 2);
  CHECK(j["straggler"]["seed"] == 9);
  CHECK(j["workload"]["rows"] == 40);
  CHECK(j["cost"]["comm_base_us"] == 500.0);
}

TEST_CASE("overrides land at dotted paths, unique bare keys, or top level") {
  const std::string base = R"({"sync": {"mode": "ssp", "slack": 3}})";
  CHECK(Parse(ApplyConfigOverride(base, "sync.slack", "1")).sync.slack == 1);
  CHECK(Parse(ApplyConfigOverride(base, "slack", "0")).sync.slack == 0);
  CHECK(Parse(ApplyConfigOverride(R"({"workers": 4})", "workers", "6"))
            .workers == 6);
  // Sections are created on demand by dotted paths.
  const auto c =
      Parse(ApplyConfigOverride("{}", "mitigation.reassignment", "true"));
  CHECK(c.mitigation.reassignment);
  // Values parse as JSON when they can, as strings otherwise.
  CHECK(Parse(ApplyConfigOverride("{}", "workload.name", "lda"))
            .workload.name == "lda");
  CHECK(Parse(ApplyConfigOverride("{}", "seed", "123")).seed == 123);

  CHECK_THROWS_AS(
      ApplyConfigOverride(R"({"seed": 1, "straggler": {"seed": 2}})", "seed",
                          "3"),
      ConfigError);
  CHECK_THROWS_AS(ApplyConfigOverride(R"({"workers": 4})", "workers.deep",
                                      "1"),
                  ConfigError);
  CHECK_THROWS_AS(ApplyConfigOverride("{}", "", "1"), ConfigError);
  CHECK_THROWS_AS(ApplyConfigOverride("{}", "sync..slack", "1"), ConfigError);
  // A bare key that exists nowhere lands at the top level, where the strict
  // parse then names it.
  CHECK_THROWS_WITH_AS(Parse(ApplyConfigOverride("{}", "flux", "9")),
                       "unknown key \"flux\" in config", ConfigError);
}

TEST_CASE("the workload factory builds the configured kernel") {
  WorkloadConfig wl;
  wl.name = "mf";
  wl.rows = 10;
  wl.cols = 8;
  wl.rank = 2;
  wl.density = 0.5;
  auto w = MakeWorkload(wl, 3);
  CHECK(w->ObjectiveLabel() == "rmse");
  CHECK(w->Info().table_capacity == 18);
  CHECK(w->Info().dimension == 2);

  wl = WorkloadConfig{};
  wl.name = "lr";
  wl.examples = 50;
  wl.dim = 20;
  wl.nnz = 4;
  w = MakeWorkload(wl, 3);
  CHECK(w->ObjectiveLabel() == "logloss");
  CHECK(w->Info().table_capacity == 20);
  CHECK(w->Info().dimension == 1);
  CHECK(w->Info().num_items == 50);

  wl = WorkloadConfig{};
  wl.name = "lda";
  wl.docs = 10;
  wl.doc_len = 5;
  wl.vocab = 30;
  wl.topics = 3;
  w = MakeWorkload(wl, 3);
  CHECK(w->ObjectiveLabel() == "assign_logprob");
  CHECK(w->Info().table_capacity == 31);
  CHECK(w->Info().dimension == 3);

  wl.name = "svm";
  CHECK_THROWS_AS(MakeWorkload(wl, 3), ConfigError);
}

// ------------------------------------------------------------------ engine

TEST_CASE("an undisturbed virtual run wastes nothing") {
  for (const char* sync : {R"("sync": {"mode": "bsp"})",
                           R"("sync": {"mode": "ssp", "slack": 2})"}) {
    const auto c = Parse(SmallMf(sync));
    const RunResult r = RunExperiment(c);
    CHECK(r.waste_ticks == 0);
    CHECK(r.wall_ticks > 0);
    CHECK(r.iter_time_ticks > 0);
    CHECK(r.workers == 4);
    CHECK(r.iterations == 8);
    CHECK(r.pattern == "ideal");
    CHECK(r.max_clock_gap <= c.sync.slack + 1);
    // Complete (iteration, worker) grid, in order.
    REQUIRE(r.records.size() == 32);
    std::set<std::pair<int64_t, int>> seen;
    for (const auto& rec : r.records) {
      CHECK(rec.wait_ticks == 0);
      CHECK(rec.comp_ticks > 0);
      seen.emplace(rec.iteration, rec.worker);
    }
    CHECK(seen.size() == 32);
    CHECK(r.objective.size() == 8);
    CHECK(r.objective_label == "rmse");
    for (double o : r.objective) CHECK(std::isfinite(o));
    CHECK(r.final_table.data.size() == 70 * 3);
  }
}

TEST_CASE("bsp equals zero-slack ssp record for record") {
  const std::string straggler =
      R"("seed": 5, "straggler": {"enabled": true, "pattern": "slow_worker",
         "probability": 0.3, "delay_percent": 100})";
  auto cb = Parse(SmallMf(straggler));
  auto cs = Parse(SmallMf(straggler + R"(, "sync": {"mode": "ssp",
                                          "slack": 0})"));
  const RunResult rb = RunExperiment(cb);
  const RunResult rs = RunExperiment(cs);
  CHECK(rb.mode == "bsp");
  CHECK(rs.mode == "ssp");
  REQUIRE(rb.records.size() == rs.records.size());
  for (size_t i = 0; i < rb.records.size(); ++i) {
    CHECK(rb.records[i].iteration == rs.records[i].iteration);
    CHECK(rb.records[i].worker == rs.records[i].worker);
    CHECK(rb.records[i].comp_ticks == rs.records[i].comp_ticks);
    CHECK(rb.records[i].comm_ticks == rs.records[i].comm_ticks);
    CHECK(rb.records[i].wait_ticks == rs.records[i].wait_ticks);
  }
  CHECK(rb.waste_ticks == rs.waste_ticks);
  CHECK(rb.final_table.data == rs.final_table.data);
  CHECK(rb.objective == rs.objective);
}

TEST_CASE("identical configs replay byte-identical outputs") {
  const auto c = Parse(SmallMf(
      R"("seed": 11, "sync": {"mode": "ssp", "slack": 1},
         "straggler": {"enabled": true, "pattern": "power_law",
                       "alpha": 4.0})"));
  const RunResult a = RunExperiment(c);
  const RunResult b = RunExperiment(c);
  CHECK(RecordsCsv(a.run_id, a.mode, a.pattern, a.records) ==
        RecordsCsv(b.run_id, b.mode, b.pattern, b.records));
  CHECK(SummaryCsv({a}, "ssp") == SummaryCsv({b}, "ssp"));
  CHECK(a.final_table.data == b.final_table.data);
  CHECK(a.objective == b.objective);
  CHECK(a.wall_ticks == b.wall_ticks);
}

TEST_CASE("mitigation does not perturb the learned table") {
  const std::string straggler =
      R"("seed": 3, "sync": {"mode": "ssp", "slack": 2},
         "straggler": {"enabled": true, "pattern": "slow_worker",
                       "probability": 0.3, "delay_percent": 100})";
  const RunResult off = RunExperiment(Parse(SmallMf(straggler)));
  const RunResult rr = RunExperiment(Parse(
      SmallMf(straggler + R"(, "mitigation": {"reassignment": true})")));
  const RunResult spec = RunExperiment(Parse(
      SmallMf(straggler + R"(, "mitigation": {"speculation": true})")));
  CHECK(rr.mode == "ssp-rr");
  CHECK(spec.mode == "ssp-spec");
  // Work moves between executors; committed values cannot change.
  CHECK(rr.final_table.data == off.final_table.data);
  CHECK(spec.final_table.data == off.final_table.data);
  // Chunks commit in a different order, so the objective sum can differ in
  // the last bits, but nothing more.
  REQUIRE(rr.objective.size() == off.objective.size());
  for (size_t i = 0; i < rr.objective.size(); ++i) {
    CHECK(rr.objective[i] ==
          doctest::Approx(off.objective[i]).epsilon(1e-12));
  }
  // Shedding the straggler's tail can only help the run.
  CHECK(rr.waste_ticks <= off.waste_ticks);
}

TEST_CASE("slow workers separate the modes") {
  const std::string straggler =
      R"("seed": 1, "straggler": {"enabled": true, "pattern": "slow_worker",
         "probability": 0.3, "delay_percent": 300})";
  const auto waste = [&](const std::string& sync) {
    return RunExperiment(Parse(SmallMf(straggler + sync))).waste_ticks;
  };
  const auto bsp = waste("");
  const auto ssp = waste(R"(, "sync": {"mode": "ssp", "slack": 1})");
  const auto rr = waste(R"(, "sync": {"mode": "ssp", "slack": 1},
                            "mitigation": {"reassignment": true})");
  CHECK(bsp > ssp);
  CHECK(ssp > rr);
  CHECK(rr > 0);  // slack 1 still pays something at this delay level
}

// ----------------------------------------------------------------- reports

TEST_CASE("summary rows reduce against the named baseline") {
  RunResult bsp;
  bsp.run_id = "bsp-x";
  bsp.mode = "bsp";
  bsp.pattern = "ideal";
  bsp.iterations = 10;
  bsp.iter_time_ticks = 100000;  // avg 10.000 ms
  bsp.waste_ticks = 50000;       // 50.000 ms
  RunResult other = bsp;
  other.run_id = "ssp-x";
  other.mode = "ssp";
  other.iter_time_ticks = 80000;  // avg 8.000 ms: 20% reduction
  other.waste_ticks = 0;          // 100% reduction

  const std::string csv = SummaryCsv({bsp, other}, "bsp");
  CHECK(csv ==
        "run_id,mode,pattern,avg_iter_ms,total_waste_ms,"
        "pct_vs_bsp_iter,pct_vs_bsp_waste\n"
        "bsp-x,bsp,ideal,10.000,50.000,0.000,0.000\n"
        "ssp-x,ssp,ideal,8.000,0.000,20.000,100.000\n");

  // Without a baseline row the percentage columns stay 0.000.
  const std::string lone = SummaryCsv({other}, "bsp");
  CHECK(lone.find("8.000,0.000,0.000,0.000") != std::string::npos);

  // A zero baseline value cannot be divided by: prints 0.000.
  RunResult zero = bsp;
  zero.waste_ticks = 0;
  const std::string z = SummaryCsv({zero, other}, "bsp");
  CHECK(z.find("ssp-x,ssp,ideal,8.000,0.000,20.000,0.000") !=
        std::string::npos);
}

TEST_CASE("trailing average drops the warm-up iterations") {
  RunResult r;
  r.iterations = 7;
  r.workers = 2;
  for (int64_t it = 1; it <= 7; ++it) {
    for (int w = 0; w < 2; ++w) {
      IterationRecord rec;
      rec.iteration = it;
      rec.worker = w;
      rec.comp_ticks = w == 0 ? it * 1000 : 500;  // max = 1000 x iteration
      rec.comm_ticks = w == 1 ? 200 : 100;        // max = 200
      r.records.push_back(rec);
    }
  }
  // skip = min(5, 6) = 5: iterations 6 and 7 remain.
  CHECK(r.TrailingAvgIterMs() ==
        doctest::Approx((6000 + 200 + 7000 + 200) / 2.0 / 1000.0));

  RunResult one;
  one.iterations = 1;
  one.workers = 1;
  IterationRecord rec;
  rec.iteration = 1;
  rec.worker = 0;
  rec.comp_ticks = 4000;
  rec.comm_ticks = 1000;
  one.records.push_back(rec);
  CHECK(one.TrailingAvgIterMs() == doctest::Approx(5.0));
}

TEST_CASE("run outputs land on disk and match the in-memory renderings") {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / "psbed_test_runner_outputs";
  fs::remove_all(dir);

  const auto c = Parse(SmallMf(R"("run_id": "unit-run")"));
  const RunResult r = RunExperiment(c);
  WriteRunOutputs(c, r, dir.string());

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  CHECK(slurp(dir / "records.csv") ==
        RecordsCsv(r.run_id, r.mode, r.pattern, r.records));
  CHECK(slurp(dir / "summary.csv") == SummaryCsv({r}, r.mode));
  CHECK(slurp(dir / "config.echo") == EchoConfig(c));
  CHECK(r.run_id == "unit-run");

  const std::string line = SummaryLine(r);
  CHECK(line.find("unit-run") != std::string::npos);
  CHECK(line.find("final_rmse=") != std::string::npos);

  CHECK_THROWS_AS(WriteCompareOutputs({r}, "nope", (dir / "cmp").string()),
                  ConfigError);
  fs::remove_all(dir);
}
