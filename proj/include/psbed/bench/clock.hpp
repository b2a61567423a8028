#pragma once

#include <chrono>
#include <cstdint>

namespace psbed::bench {

// One tick = 1 microsecond. All durations and timestamps in the harness are
// integer ticks; reports convert to milliseconds only at the edges.
using Ticks = int64_t;

constexpr Ticks kTicksPerMs = 1000;
constexpr Ticks kTicksPerSecond = 1000 * 1000;

inline Ticks MsToTicks(double ms) {
  return static_cast<Ticks>(ms * static_cast<double>(kTicksPerMs) + 0.5);
}

enum class ClockMode { kReal, kVirtual };

// Monotonic time source. The real clock wraps steady_clock; the virtual clock
// is owned by the deterministic scheduler (see sim/scheduler.hpp).
class ClockSource {
 public:
  virtual ~ClockSource() = default;
  virtual Ticks Now() const = 0;
  virtual ClockMode Mode() const = 0;
};

class RealClock : public ClockSource {
 public:
  RealClock() : epoch_(std::chrono::steady_clock::now()) {}

  Ticks Now() const override {
    auto d = std::chrono::steady_clock::now() - epoch_;
    return std::chrono::duration_cast<std::chrono::microseconds>(d).count();
  }

  ClockMode Mode() const override { return ClockMode::kReal; }

 private:
  std::chrono::steady_clock::time_point epoch_;
};

}  // namespace psbed::bench
