#include "psbed/runner/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "psbed/workloads/dataset.hpp"
#include "psbed/workloads/lda.hpp"
#include "psbed/workloads/lr.hpp"
#include "psbed/workloads/mf.hpp"

namespace psbed::runner {

namespace {

using nlohmann::json;

[[noreturn]] void Fail(const std::string& msg) { throw ConfigError(msg); }

void ExpectObject(const json& j, const std::string& where) {
  if (!j.is_object()) Fail(where + " must be a JSON object");
}

void RejectUnknownKeys(const json& j, const std::string& section,
                       std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* k) { return it.key() == k; });
    if (!known) Fail("unknown key \"" + it.key() + "\" in " + section);
  }
}

template <typename T>
T Read(const json& j, const std::string& section, const char* key, T def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    Fail("bad value for \"" + std::string(key) + "\" in " + section);
  }
}

void ParseSync(const json& j, RunConfig* out) {
  ExpectObject(j, "sync");
  RejectUnknownKeys(j, "sync", {"mode", "slack"});
  const std::string mode = Read<std::string>(j, "sync", "mode", "bsp");
  if (mode == "bsp") {
    out->sync.mode = consistency::SyncMode::kBsp;
    out->sync.slack = Read<int>(j, "sync", "slack", 0);
  } else if (mode == "ssp") {
    out->sync.mode = consistency::SyncMode::kSsp;
    out->sync.slack = Read<int>(j, "sync", "slack", 3);
  } else {
    Fail("sync.mode must be \"bsp\" or \"ssp\"");
  }
}

void ParseStraggler(const json& j, RunConfig* out) {
  ExpectObject(j, "straggler");
  RejectUnknownKeys(j, "straggler",
                    {"enabled", "pattern", "delay_percent", "probability",
                     "period_s", "alpha", "persistent_workers",
                     "persistent_load_factor", "seed", "cap_multiplier"});
  auto& s = out->straggler;
  s.enabled = Read<bool>(j, "straggler", "enabled", s.enabled);
  s.pattern = inject::PatternFromName(
      Read<std::string>(j, "straggler", "pattern", "ideal"));
  s.delay_percent =
      Read<double>(j, "straggler", "delay_percent", s.delay_percent);
  s.probability = Read<double>(j, "straggler", "probability", s.probability);
  s.period_s = Read<double>(j, "straggler", "period_s", s.period_s);
  s.alpha = Read<double>(j, "straggler", "alpha", s.alpha);
  s.persistent_workers = Read<std::vector<int>>(
      j, "straggler", "persistent_workers", s.persistent_workers);
  s.persistent_load_factor = Read<double>(
      j, "straggler", "persistent_load_factor", s.persistent_load_factor);
  s.seed = Read<uint64_t>(j, "straggler", "seed", out->seed);
  s.cap_multiplier =
      Read<double>(j, "straggler", "cap_multiplier", s.cap_multiplier);
}

void ParseMitigation(const json& j, RunConfig* out) {
  ExpectObject(j, "mitigation");
  RejectUnknownKeys(j, "mitigation",
                    {"reassignment", "speculation", "detect_threshold",
                     "shed_fraction", "progress_broadcast_interval",
                     "clone_lag_threshold", "max_clones"});
  auto& m = out->mitigation;
  m.reassignment = Read<bool>(j, "mitigation", "reassignment", m.reassignment);
  m.speculation = Read<bool>(j, "mitigation", "speculation", m.speculation);
  m.detect_threshold =
      Read<double>(j, "mitigation", "detect_threshold", m.detect_threshold);
  m.shed_fraction =
      Read<double>(j, "mitigation", "shed_fraction", m.shed_fraction);
  m.progress_broadcast_interval =
      Read<double>(j, "mitigation", "progress_broadcast_interval",
                   m.progress_broadcast_interval);
  m.clone_lag_threshold = Read<double>(j, "mitigation", "clone_lag_threshold",
                                       m.clone_lag_threshold);
  m.max_clones = Read<int>(j, "mitigation", "max_clones", m.max_clones);
}

void ParseWorkload(const json& j, RunConfig* out) {
  ExpectObject(j, "workload");
  auto& w = out->workload;
  w.name = Read<std::string>(j, "workload", "name", w.name);
  if (w.name == "mf") {
    RejectUnknownKeys(j, "workload (mf)",
                      {"name", "item_cost_us", "rows", "cols", "rank",
                       "density", "noise", "step", "reg"});
    w.rows = Read<uint32_t>(j, "workload", "rows", w.rows);
    w.cols = Read<uint32_t>(j, "workload", "cols", w.cols);
    w.rank = Read<int>(j, "workload", "rank", w.rank);
    w.density = Read<double>(j, "workload", "density", w.density);
    w.noise = Read<double>(j, "workload", "noise", w.noise);
    w.step = Read<double>(j, "workload", "step", w.step);
    w.reg = Read<double>(j, "workload", "reg", w.reg);
  } else if (w.name == "lr") {
    RejectUnknownKeys(j, "workload (lr)",
                      {"name", "item_cost_us", "examples", "dim", "nnz",
                       "margin", "step"});
    w.examples = Read<uint32_t>(j, "workload", "examples", w.examples);
    w.dim = Read<uint32_t>(j, "workload", "dim", w.dim);
    w.nnz = Read<int>(j, "workload", "nnz", w.nnz);
    w.margin = Read<double>(j, "workload", "margin", w.margin);
    w.step = Read<double>(j, "workload", "step", 0.1);
  } else if (w.name == "lda") {
    RejectUnknownKeys(j, "workload (lda)",
                      {"name", "item_cost_us", "docs", "doc_len", "vocab",
                       "topics", "alpha", "beta"});
    w.docs = Read<uint32_t>(j, "workload", "docs", w.docs);
    w.doc_len = Read<int>(j, "workload", "doc_len", w.doc_len);
    w.vocab = Read<uint32_t>(j, "workload", "vocab", w.vocab);
    w.topics = Read<int>(j, "workload", "topics", w.topics);
    w.alpha = Read<double>(j, "workload", "alpha", w.alpha);
    w.beta = Read<double>(j, "workload", "beta", w.beta);
  } else {
    Fail("workload.name must be \"mf\", \"lr\" or \"lda\"");
  }
  w.item_cost_us = Read<double>(j, "workload", "item_cost_us", w.item_cost_us);
}

void ParseCost(const json& j, RunConfig* out) {
  ExpectObject(j, "cost");
  RejectUnknownKeys(j, "cost",
                    {"comm_base_us", "comm_per_item_us", "control_latency_us"});
  auto& c = out->cost;
  c.comm_base_us = Read<double>(j, "cost", "comm_base_us", c.comm_base_us);
  c.comm_per_item_us =
      Read<double>(j, "cost", "comm_per_item_us", c.comm_per_item_us);
  c.control_latency_us =
      Read<double>(j, "cost", "control_latency_us", c.control_latency_us);
}

}  // namespace

void MitigationConfig::Validate() const {
  PSBED_CHECK_MSG(detect_threshold >= 0.0, "detect_threshold must be >= 0");
  PSBED_CHECK_MSG(shed_fraction > 0.0 && shed_fraction <= 0.5,
                  "shed_fraction must lie in (0, 0.5]");
  PSBED_CHECK_MSG(
      progress_broadcast_interval > 0.0 && progress_broadcast_interval <= 0.5,
      "progress_broadcast_interval must lie in (0, 0.5]");
  PSBED_CHECK_MSG(clone_lag_threshold > 0.0 && clone_lag_threshold < 1.0,
                  "clone_lag_threshold must lie in (0, 1)");
  PSBED_CHECK_MSG(max_clones >= 1, "max_clones must be >= 1");
}

void CostConfig::Validate() const {
  PSBED_CHECK_MSG(comm_base_us >= 0.0, "comm_base_us must be >= 0");
  PSBED_CHECK_MSG(comm_per_item_us >= 0.0, "comm_per_item_us must be >= 0");
  PSBED_CHECK_MSG(control_latency_us >= 0.0,
                  "control_latency_us must be >= 0");
}

void WorkloadConfig::Validate() const {
  PSBED_CHECK_MSG(item_cost_us >= 0.0, "item_cost_us must be >= 0");
  if (name == "mf") {
    PSBED_CHECK_MSG(rows > 0 && cols > 0, "mf shape must be positive");
    PSBED_CHECK_MSG(rank > 0, "mf rank must be positive");
    PSBED_CHECK_MSG(density > 0.0 && density <= 1.0,
                    "mf density must lie in (0, 1]");
    PSBED_CHECK_MSG(noise >= 0.0, "mf noise must be >= 0");
    PSBED_CHECK_MSG(step > 0.0, "mf step must be positive");
    PSBED_CHECK_MSG(reg >= 0.0, "mf reg must be >= 0");
  } else if (name == "lr") {
    PSBED_CHECK_MSG(examples > 0 && dim > 0, "lr shape must be positive");
    PSBED_CHECK_MSG(nnz > 0 && static_cast<uint32_t>(nnz) <= dim,
                    "lr nnz must lie in [1, dim]");
    PSBED_CHECK_MSG(margin > 0.0, "lr margin must be positive");
    PSBED_CHECK_MSG(step > 0.0, "lr step must be positive");
  } else if (name == "lda") {
    PSBED_CHECK_MSG(docs > 0 && doc_len > 0, "lda shape must be positive");
    PSBED_CHECK_MSG(topics > 0, "lda topics must be positive");
    PSBED_CHECK_MSG(vocab >= static_cast<uint32_t>(topics),
                    "lda vocab must be >= topics");
    PSBED_CHECK_MSG(alpha > 0.0 && beta > 0.0, "lda priors must be positive");
  } else {
    throw ConfigError("workload.name must be \"mf\", \"lr\" or \"lda\"");
  }
}

void RunConfig::Validate() const {
  try {
    PSBED_CHECK_MSG(workers >= 1, "workers must be >= 1");
    PSBED_CHECK_MSG(iterations >= 1, "iterations must be >= 1");
    PSBED_CHECK_MSG(shards >= 0, "shards must be >= 0");
    sync.Validate();
    straggler.Validate();
    mitigation.Validate();
    workload.Validate();
    cost.Validate();
    if (straggler.enabled &&
        straggler.pattern == inject::Pattern::kPersistent) {
      PSBED_CHECK_MSG(!straggler.persistent_workers.empty(),
                      "persistent pattern needs persistent_workers");
      for (int w : straggler.persistent_workers) {
        PSBED_CHECK_MSG(w >= 0 && w < workers,
                        "persistent worker id out of range");
      }
    }
  } catch (const InvariantError& e) {
    // Bad values in a config file are user errors, not runtime breaches.
    throw ConfigError(e.what());
  }
}

std::string RunConfig::PatternLabel() const {
  return straggler.enabled ? inject::PatternName(straggler.pattern) : "ideal";
}

std::string RunConfig::EffectiveRunId() const {
  if (!run_id.empty()) return run_id;
  consistency::SyncPolicy named = sync;
  named.reassignment = mitigation.reassignment;
  named.speculation = mitigation.speculation;
  return named.Name() + "-" + PatternLabel();
}

RunConfig ParseRunConfig(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    Fail(std::string("config is not valid JSON: ") + e.what());
  }
  ExpectObject(j, "config");
  RejectUnknownKeys(j, "config",
                    {"run_id", "seed", "workers", "iterations", "clock_mode",
                     "shards", "commit_order", "sync", "straggler",
                     "mitigation", "workload", "cost"});

  RunConfig c;
  c.run_id = Read<std::string>(j, "config", "run_id", "");
  c.seed = Read<uint64_t>(j, "config", "seed", c.seed);
  c.workers = Read<int>(j, "config", "workers", c.workers);
  c.iterations = Read<int64_t>(j, "config", "iterations", c.iterations);
  const std::string clock =
      Read<std::string>(j, "config", "clock_mode", "virtual");
  if (clock == "virtual") {
    c.clock_mode = bench::ClockMode::kVirtual;
  } else if (clock == "real") {
    c.clock_mode = bench::ClockMode::kReal;
  } else {
    Fail("clock_mode must be \"virtual\" or \"real\"");
  }
  c.shards = Read<int>(j, "config", "shards", c.shards);
  const std::string order =
      Read<std::string>(j, "config", "commit_order", "canonical");
  if (order == "canonical") {
    c.commit_order = ps::CommitOrder::kCanonical;
  } else if (order == "arrival") {
    c.commit_order = ps::CommitOrder::kArrival;
  } else {
    Fail("commit_order must be \"canonical\" or \"arrival\"");
  }

  if (auto it = j.find("sync"); it != j.end()) ParseSync(*it, &c);
  if (auto it = j.find("straggler"); it != j.end()) {
    ParseStraggler(*it, &c);
  } else {
    c.straggler.seed = c.seed;
  }
  if (auto it = j.find("mitigation"); it != j.end()) ParseMitigation(*it, &c);
  if (auto it = j.find("workload"); it != j.end()) ParseWorkload(*it, &c);
  if (auto it = j.find("cost"); it != j.end()) ParseCost(*it, &c);

  c.sync.reassignment = c.mitigation.reassignment;
  c.sync.speculation = c.mitigation.speculation;
  c.Validate();
  return c;
}

RunConfig LoadRunConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseRunConfig(buf.str());
}

std::string EchoConfig(const RunConfig& c) {
  json j;
  j["run_id"] = c.EffectiveRunId();
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["iterations"] = c.iterations;
  j["clock_mode"] =
      c.clock_mode == bench::ClockMode::kVirtual ? "virtual" : "real";
  j["shards"] = c.shards == 0 ? c.workers : c.shards;
  j["commit_order"] =
      c.commit_order == ps::CommitOrder::kCanonical ? "canonical" : "arrival";
  j["sync"] = {
      {"mode", c.sync.mode == consistency::SyncMode::kBsp ? "bsp" : "ssp"},
      {"slack", c.sync.slack},
  };
  j["straggler"] = {
      {"enabled", c.straggler.enabled},
      {"pattern", inject::PatternName(c.straggler.pattern)},
      {"delay_percent", c.straggler.delay_percent},
      {"probability", c.straggler.probability},
      {"period_s", c.straggler.period_s},
      {"alpha", c.straggler.alpha},
      {"persistent_workers", c.straggler.persistent_workers},
      {"persistent_load_factor", c.straggler.persistent_load_factor},
      {"seed", c.straggler.seed},
      {"cap_multiplier", c.straggler.cap_multiplier},
  };
  j["mitigation"] = {
      {"reassignment", c.mitigation.reassignment},
      {"speculation", c.mitigation.speculation},
      {"detect_threshold", c.mitigation.detect_threshold},
      {"shed_fraction", c.mitigation.shed_fraction},
      {"progress_broadcast_interval", c.mitigation.progress_broadcast_interval},
      {"clone_lag_threshold", c.mitigation.clone_lag_threshold},
      {"max_clones", c.mitigation.max_clones},
  };
  json wl;
  wl["name"] = c.workload.name;
  wl["item_cost_us"] = c.workload.item_cost_us;
  if (c.workload.name == "mf") {
    wl["rows"] = c.workload.rows;
    wl["cols"] = c.workload.cols;
    wl["rank"] = c.workload.rank;
    wl["density"] = c.workload.density;
    wl["noise"] = c.workload.noise;
    wl["step"] = c.workload.step;
    wl["reg"] = c.workload.reg;
  } else if (c.workload.name == "lr") {
    wl["examples"] = c.workload.examples;
    wl["dim"] = c.workload.dim;
    wl["nnz"] = c.workload.nnz;
    wl["margin"] = c.workload.margin;
    wl["step"] = c.workload.step;
  } else {
    wl["docs"] = c.workload.docs;
    wl["doc_len"] = c.workload.doc_len;
    wl["vocab"] = c.workload.vocab;
    wl["topics"] = c.workload.topics;
    wl["alpha"] = c.workload.alpha;
    wl["beta"] = c.workload.beta;
  }
  j["workload"] = wl;
  j["cost"] = {
      {"comm_base_us", c.cost.comm_base_us},
      {"comm_per_item_us", c.cost.comm_per_item_us},
      {"control_latency_us", c.cost.control_latency_us},
  };
  return j.dump(2) + "\n";
}

std::string ApplyConfigOverride(const std::string& text,
                                const std::string& path,
                                const std::string& value) {
  if (path.empty()) Fail("override path is empty");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    Fail(std::string("config is not valid JSON: ") + e.what());
  }
  ExpectObject(j, "config");

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare words ("mf", "real") are string values
  }

  if (path.find('.') == std::string::npos) {
    // Bare key: must resolve uniquely across the top level and sections.
    std::vector<json*> hits;
    if (j.contains(path)) hits.push_back(&j);
    for (auto& [k, v] : j.items()) {
      if (v.is_object() && v.contains(path)) hits.push_back(&v);
    }
    if (hits.empty()) {
      // Unknown keys created here are still rejected by the strict parse,
      // so a typo cannot slip through silently.
      j[path] = parsed;
      return j.dump();
    }
    if (hits.size() > 1) {
      Fail("override key \"" + path + "\" is ambiguous; use a dotted path");
    }
    (*hits[0])[path] = parsed;
    return j.dump();
  }

  json* cur = &j;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string part = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) Fail("override path has an empty segment: " + path);
    if (dot == std::string::npos) {
      (*cur)[part] = parsed;
      break;
    }
    if (!cur->contains(part)) (*cur)[part] = json::object();
    json& next = (*cur)[part];
    if (!next.is_object()) {
      Fail("override path crosses the non-object key \"" + part + "\"");
    }
    cur = &next;
    start = dot + 1;
  }
  return j.dump();
}

std::unique_ptr<workloads::Workload> MakeWorkload(const WorkloadConfig& wl,
                                                  uint64_t seed) {
  wl.Validate();
  if (wl.name == "mf") {
    auto data = workloads::GenRatings(wl.rows, wl.cols, wl.rank, wl.density,
                                      wl.noise, seed);
    return std::make_unique<workloads::MatrixFactorization>(
        std::move(data), wl.rank, wl.step, wl.reg, seed);
  }
  if (wl.name == "lr") {
    auto data =
        workloads::GenExamples(wl.examples, wl.dim, wl.margin, wl.nnz, seed);
    return std::make_unique<workloads::LogisticRegression>(std::move(data),
                                                           wl.step);
  }
  auto corpus =
      workloads::GenCorpus(wl.docs, wl.doc_len, wl.vocab, wl.topics, seed);
  return std::make_unique<workloads::CollapsedGibbsLda>(std::move(corpus),
                                                        wl.alpha, wl.beta,
                                                        seed);
}

}  // namespace psbed::runner
