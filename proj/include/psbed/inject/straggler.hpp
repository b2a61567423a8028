#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "psbed/bench/clock.hpp"
#include "psbed/common/error.hpp"
#include "psbed/common/hash_rng.hpp"

namespace psbed::inject {

// The five delay regimes studied. IDEAL injects nothing and is the baseline
// every other regime is compared against.
enum class Pattern {
  kIdeal,
  kSlowWorker,        // transient: a worker is slowed for one iteration
  kDisruptedMachine,  // transient: an external process loads one machine
  kPowerLaw,          // transient: Pareto-tailed per-iteration delays
  kPersistent,        // structural: some workers carry more work every iteration
};

std::string PatternName(Pattern p);
Pattern PatternFromName(const std::string& name);

struct StragglerConfig {
  bool enabled = false;
  Pattern pattern = Pattern::kIdeal;
  double delay_percent = 100.0;  // slow-worker magnitude / disruptor intensity
  double probability = 0.3;      // transient trigger probability
  double period_s = 1.0;         // disruptor cadence (one window per period)
  double alpha = 4.0;            // Pareto shape (> 1)
  std::vector<int> persistent_workers;
  double persistent_load_factor = 0.75;  // non-straggler share in (0, 1]
  uint64_t seed = 1;
  double cap_multiplier = 10.0;  // power-law delay cap, in nominals

  void Validate() const {
    PSBED_CHECK_MSG(delay_percent >= 0.0, "delay_percent must be >= 0");
    PSBED_CHECK_MSG(probability >= 0.0 && probability <= 1.0,
                    "probability must lie in [0, 1]");
    PSBED_CHECK_MSG(period_s > 0.0, "period_s must be positive");
    if (pattern == Pattern::kPowerLaw) {
      // Shape <= 1 has no finite mean; flat-tail runs never terminate
      // meaningfully, so it is a configuration error, not a sample.
      PSBED_CHECK_MSG(alpha > 1.0, "power-law alpha must be > 1");
    }
    PSBED_CHECK_MSG(
        persistent_load_factor > 0.0 && persistent_load_factor <= 1.0,
        "persistent_load_factor must lie in (0, 1]");
    PSBED_CHECK_MSG(cap_multiplier > 0.0, "cap_multiplier must be positive");
    for (int w : persistent_workers) {
      PSBED_CHECK_MSG(w >= 0, "persistent worker ids must be >= 0");
    }
  }
};

// Injected sleep, pre-sliced across the delay points one iteration passes
// (before the get batch, mid-compute per mini-batch, before the flush).
// Slices are even with the remainder on the final point, so the slices sum
// exactly to the total.
struct DelayPlan {
  bench::Ticks total_delay = 0;
  int num_points = 0;
  bench::Ticks per_point = 0;  // floor share

  bench::Ticks PointDelay(int point) const {
    PSBED_CHECK_MSG(point >= 0 && point < num_points,
                    "delay point out of range");
    if (point + 1 == num_points) {
      return total_delay - per_point * (num_points - 1);
    }
    return per_point;
  }
};

DelayPlan SliceDelay(bench::Ticks total_delay, int num_points);

// --- pure per-(worker, iteration) draws ---------------------------------
// All randomness keys on (seed, worker, iteration) so the same tuple always
// reproduces the same decision, independent of scheduling.

// Bernoulli(probability) trigger for the transient patterns.
bool CheckTransientStraggler(const StragglerConfig& config, int worker,
                             int64_t iteration);

// True iff the worker carries a structurally heavier share (persistent).
bool CheckPermanentStraggler(const StragglerConfig& config, int worker);

// Pareto multiplier m = u^(-1/alpha), u in (0,1], m >= 1. Monotone in alpha
// for a fixed u: larger alpha -> smaller m.
double SampleParetoMultiplier(double alpha, double u);

// Extra delay for one triggered power-law event: (m - 1) x nominal, capped
// at cap_multiplier x nominal.
bench::Ticks SamplePowerLawDelay(const StragglerConfig& config, int worker,
                                 int64_t iteration, bench::Ticks nominal);

// Extra delay for one triggered slow-worker event: uniform in
// [0, 2 x nominal], scaled by delay_percent/100 (mean = pct/100 x nominal).
bench::Ticks SampleSlowWorkerDelay(const StragglerConfig& config, int worker,
                                   int64_t iteration, bench::Ticks nominal);

// Top-level per-iteration plan: returns the sleep plan for this worker and
// iteration under the active pattern, sliced across num_delay_points.
// Disruption and persistent imbalance do not sleep (they act through the
// compute multiplier and the assignment split) and yield empty plans.
DelayPlan InjectStraggler(const StragglerConfig& config, int worker,
                          int64_t iteration, bench::Ticks nominal_iter_ticks,
                          int num_delay_points);

// --- disrupted-machine schedule ------------------------------------------
// Window w covers [w x period, (w+1) x period). A window triggers with
// config.probability (keyed by window index); triggered windows hit machines
// round-robin in trigger order.

bool DisruptWindowTriggered(const StragglerConfig& config, int64_t window);

// Machine disrupted during `window`, or -1 if the window is quiet.
int DisruptedMachineInWindow(const StragglerConfig& config, int64_t window,
                             int num_machines);

// Compute-time multiplier for a worker on `machine` at virtual time `now`:
// (1 + delay_percent/100) inside a disrupted window, 1.0 otherwise.
double DisruptComputeFactor(const StragglerConfig& config, int machine,
                            int num_machines, bench::Ticks now);

// --- persistent load split -------------------------------------------------
// Items for `worker` when each worker's even share is `base_items`:
// non-stragglers get round(base x factor); stragglers absorb the remainder
// so the total base_items x num_workers is conserved exactly.
uint32_t PersistentAssignmentScale(const StragglerConfig& config, int worker,
                                   uint32_t base_items, int num_workers);

}  // namespace psbed::inject
