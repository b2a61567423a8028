#include "psbed/inject/disruptor.hpp"

#include <chrono>
#include <cmath>

#include "psbed/common/error.hpp"

namespace psbed::inject {

int Disruptor::ThreadCountFor(double intensity_percent, int cores) {
  PSBED_CHECK_MSG(intensity_percent >= 0.0, "intensity must be >= 0");
  PSBED_CHECK_MSG(cores > 0, "core count must be positive");
  return static_cast<int>(
      std::llround(intensity_percent / 100.0 * static_cast<double>(cores)));
}

Disruptor::Disruptor(double intensity_percent, int cores,
                     bench::Ticks duration) {
  PSBED_CHECK_MSG(duration >= 0, "disruptor duration must be >= 0");
  const int n = ThreadCountFor(intensity_percent, cores);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::microseconds(duration);
  threads_.reserve(n);
  for (int i = 0; i < n; ++i) {
    threads_.emplace_back([this, deadline] {
      // Busy arithmetic loop; checks the stop flag and deadline coarsely so
      // the spin dominates the duty cycle.
      volatile double sink = 1.0;
      while (!stop_.load(std::memory_order_relaxed)) {
        for (int k = 0; k < 4096; ++k) sink = sink * 1.0000001 + 1e-9;
        if (std::chrono::steady_clock::now() >= deadline) break;
      }
    });
  }
}

void Disruptor::Cancel() { stop_.store(true, std::memory_order_relaxed); }

Disruptor::~Disruptor() {
  Cancel();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
}

}  // namespace psbed::inject
