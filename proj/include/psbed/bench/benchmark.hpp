#pragma once

#include <cstdint>
#include <utility>

#include "psbed/bench/clock.hpp"

namespace psbed::bench {

// Accumulating stopwatch bound to a ClockSource. Works identically against
// the real and the virtual clock: a measured block's duration is the clock
// delta around it. Nested measurements into the same accumulator are additive
// by design (the outer block includes the inner one).
class Benchmark {
 public:
  explicit Benchmark(const ClockSource& clock) : clock_(&clock) {}

  // Runs `block` and returns its duration; also adds it to the accumulator.
  template <typename F>
  Ticks Measure(F&& block) {
    const Ticks t0 = clock_->Now();
    std::forward<F>(block)();
    const Ticks d = clock_->Now() - t0;
    total_ += d;
    ++samples_;
    return d;
  }

  // Like Measure but the block returns a value: yields {duration, result}.
  template <typename F>
  auto MeasureR(F&& block) {
    const Ticks t0 = clock_->Now();
    auto result = std::forward<F>(block)();
    const Ticks d = clock_->Now() - t0;
    total_ += d;
    ++samples_;
    return std::pair<Ticks, decltype(result)>(d, std::move(result));
  }

  // Adds an externally measured duration (e.g. a wait segment).
  void Accumulate(Ticks d) {
    total_ += d;
    ++samples_;
  }

  Ticks Total() const { return total_; }
  int64_t SampleCount() const { return samples_; }

  void Reset() {
    total_ = 0;
    samples_ = 0;
  }

 private:
  const ClockSource* clock_;
  Ticks total_ = 0;
  int64_t samples_ = 0;
};

}  // namespace psbed::bench
