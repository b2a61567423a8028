#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

#include "psbed/bench/clock.hpp"

namespace psbed::inject {

// Real-clock disruptor: round(intensity/100 x cores) busy-spin threads that
// compete with the workers for CPU until the duration elapses or Cancel()
// is called. Only meaningful under the real clock; virtual runs model
// disruption as a compute multiplier instead and must not construct one.
class Disruptor {
 public:
  Disruptor(double intensity_percent, int cores, bench::Ticks duration);
  ~Disruptor();

  Disruptor(const Disruptor&) = delete;
  Disruptor& operator=(const Disruptor&) = delete;

  static int ThreadCountFor(double intensity_percent, int cores);

  int thread_count() const { return static_cast<int>(threads_.size()); }
  bool Running() const { return !stop_.load(std::memory_order_relaxed); }

  // Stops all spin threads early; idempotent.
  void Cancel();

 private:
  std::atomic<bool> stop_{false};
  std::vector<std::thread> threads_;
};

}  // namespace psbed::inject
