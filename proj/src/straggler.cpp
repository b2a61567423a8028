#include "psbed/inject/straggler.hpp"

#include <algorithm>

namespace psbed::inject {

namespace {
// Domain separators so the per-site draws are independent streams.
constexpr uint64_t kTransientSite = 0x7472616e73ULL;   // "trans"
constexpr uint64_t kSlowSite = 0x736c6f77ULL;          // "slow"
constexpr uint64_t kParetoSite = 0x706172ULL;          // "par"
constexpr uint64_t kWindowSite = 0x77696eULL;          // "win"
}  // namespace

std::string PatternName(Pattern p) {
  switch (p) {
    case Pattern::kIdeal: return "ideal";
    case Pattern::kSlowWorker: return "slow_worker";
    case Pattern::kDisruptedMachine: return "disrupted_machine";
    case Pattern::kPowerLaw: return "power_law";
    case Pattern::kPersistent: return "persistent";
  }
  PSBED_CHECK_MSG(false, "unreachable pattern");
  return {};
}

Pattern PatternFromName(const std::string& name) {
  if (name == "ideal") return Pattern::kIdeal;
  if (name == "slow_worker") return Pattern::kSlowWorker;
  if (name == "disrupted_machine") return Pattern::kDisruptedMachine;
  if (name == "power_law") return Pattern::kPowerLaw;
  if (name == "persistent") return Pattern::kPersistent;
  throw ConfigError("unknown straggler pattern: " + name);
}

DelayPlan SliceDelay(bench::Ticks total_delay, int num_points) {
  PSBED_CHECK_MSG(total_delay >= 0, "negative delay");
  PSBED_CHECK_MSG(num_points > 0, "delay plan needs at least one point");
  DelayPlan plan;
  plan.total_delay = total_delay;
  plan.num_points = num_points;
  plan.per_point = total_delay / num_points;
  return plan;
}

bool CheckTransientStraggler(const StragglerConfig& config, int worker,
                             int64_t iteration) {
  if (!config.enabled) return false;
  PSBED_CHECK_MSG(config.pattern == Pattern::kSlowWorker ||
                      config.pattern == Pattern::kDisruptedMachine ||
                      config.pattern == Pattern::kPowerLaw,
                  "transient check under a non-transient pattern");
  const uint64_t h = HashMix(config.seed, kTransientSite,
                             static_cast<uint64_t>(worker),
                             static_cast<uint64_t>(iteration));
  return HashBernoulli(h, config.probability);
}

bool CheckPermanentStraggler(const StragglerConfig& config, int worker) {
  if (!config.enabled || config.pattern != Pattern::kPersistent) return false;
  return std::find(config.persistent_workers.begin(),
                   config.persistent_workers.end(),
                   worker) != config.persistent_workers.end();
}

double SampleParetoMultiplier(double alpha, double u) {
  PSBED_CHECK_MSG(alpha > 1.0, "power-law alpha must be > 1");
  PSBED_CHECK_MSG(u > 0.0 && u <= 1.0, "pareto u must lie in (0, 1]");
  return std::pow(u, -1.0 / alpha);
}

bench::Ticks SamplePowerLawDelay(const StragglerConfig& config, int worker,
                                 int64_t iteration, bench::Ticks nominal) {
  const uint64_t h = HashMix(config.seed, kParetoSite,
                             static_cast<uint64_t>(worker),
                             static_cast<uint64_t>(iteration));
  const double u = ToUnitDoubleOpenLow(h);
  const double m = SampleParetoMultiplier(config.alpha, u);
  const double extra = std::min(m - 1.0, config.cap_multiplier);
  return static_cast<bench::Ticks>(extra * static_cast<double>(nominal));
}

bench::Ticks SampleSlowWorkerDelay(const StragglerConfig& config, int worker,
                                   int64_t iteration, bench::Ticks nominal) {
  const uint64_t h = HashMix(config.seed, kSlowSite,
                             static_cast<uint64_t>(worker),
                             static_cast<uint64_t>(iteration));
  const double u2 = 2.0 * ToUnitDouble(h);  // uniform [0, 2)
  const double scale = config.delay_percent / 100.0;
  return static_cast<bench::Ticks>(scale * u2 * static_cast<double>(nominal));
}

DelayPlan InjectStraggler(const StragglerConfig& config, int worker,
                          int64_t iteration, bench::Ticks nominal_iter_ticks,
                          int num_delay_points) {
  PSBED_CHECK_MSG(nominal_iter_ticks >= 0, "negative nominal iteration time");
  if (!config.enabled || config.pattern == Pattern::kIdeal ||
      config.pattern == Pattern::kPersistent ||
      config.pattern == Pattern::kDisruptedMachine) {
    return SliceDelay(0, num_delay_points);
  }
  if (!CheckTransientStraggler(config, worker, iteration)) {
    return SliceDelay(0, num_delay_points);
  }
  bench::Ticks total = 0;
  if (config.pattern == Pattern::kSlowWorker) {
    total = SampleSlowWorkerDelay(config, worker, iteration,
                                  nominal_iter_ticks);
  } else {  // kPowerLaw
    total = SamplePowerLawDelay(config, worker, iteration, nominal_iter_ticks);
  }
  return SliceDelay(total, num_delay_points);
}

bool DisruptWindowTriggered(const StragglerConfig& config, int64_t window) {
  if (!config.enabled || config.pattern != Pattern::kDisruptedMachine) {
    return false;
  }
  const uint64_t h =
      HashMix(config.seed, kWindowSite, static_cast<uint64_t>(window));
  return HashBernoulli(h, config.probability);
}

int DisruptedMachineInWindow(const StragglerConfig& config, int64_t window,
                             int num_machines) {
  PSBED_CHECK_MSG(num_machines > 0, "need at least one machine");
  if (!DisruptWindowTriggered(config, window)) return -1;
  // Round-robin over triggered windows only.
  int64_t trigger_index = 0;
  for (int64_t w = 0; w < window; ++w) {
    if (DisruptWindowTriggered(config, w)) ++trigger_index;
  }
  return static_cast<int>(trigger_index % num_machines);
}

double DisruptComputeFactor(const StragglerConfig& config, int machine,
                            int num_machines, bench::Ticks now) {
  if (!config.enabled || config.pattern != Pattern::kDisruptedMachine) {
    return 1.0;
  }
  const auto period =
      static_cast<bench::Ticks>(config.period_s * bench::kTicksPerSecond);
  PSBED_CHECK_MSG(period > 0, "disruption period must be positive");
  const int64_t window = now / period;
  if (DisruptedMachineInWindow(config, window, num_machines) != machine) {
    return 1.0;
  }
  return 1.0 + config.delay_percent / 100.0;
}

uint32_t PersistentAssignmentScale(const StragglerConfig& config, int worker,
                                   uint32_t base_items, int num_workers) {
  PSBED_CHECK_MSG(num_workers > 0, "need at least one worker");
  PSBED_CHECK_MSG(worker >= 0 && worker < num_workers, "worker out of range");
  if (!config.enabled || config.pattern != Pattern::kPersistent ||
      config.persistent_workers.empty()) {
    return base_items;
  }
  int num_stragglers = 0;
  for (int w = 0; w < num_workers; ++w) {
    if (CheckPermanentStraggler(config, w)) ++num_stragglers;
  }
  if (num_stragglers == 0) return base_items;
  PSBED_CHECK_MSG(num_stragglers < num_workers,
                  "persistent pattern needs at least one unloaded worker");
  const uint64_t total =
      static_cast<uint64_t>(base_items) * static_cast<uint64_t>(num_workers);
  const auto light = static_cast<uint32_t>(
      std::llround(config.persistent_load_factor *
                   static_cast<double>(base_items)));
  const uint64_t light_total =
      static_cast<uint64_t>(light) * (num_workers - num_stragglers);
  PSBED_CHECK_MSG(light_total <= total, "load factor over-assigns light workers");
  const uint64_t heavy_total = total - light_total;
  if (!CheckPermanentStraggler(config, worker)) return light;
  // Stragglers split the remainder; earlier straggler ids take the extras.
  const uint64_t share = heavy_total / num_stragglers;
  const uint64_t extras = heavy_total % num_stragglers;
  int straggler_rank = 0;
  for (int w = 0; w < worker; ++w) {
    if (CheckPermanentStraggler(config, w)) ++straggler_rank;
  }
  return static_cast<uint32_t>(
      share + (static_cast<uint64_t>(straggler_rank) < extras ? 1 : 0));
}

}  // namespace psbed::inject
