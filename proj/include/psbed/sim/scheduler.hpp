#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

#include "psbed/bench/clock.hpp"

namespace psbed::sim {

// Deterministic cooperative scheduler for virtual-clock runs.
//
// Each worker body runs on its own OS thread, but exactly one context is ever
// executing: control passes worker -> driver -> worker through an event queue
// keyed by (virtual time, lane, sequence). Time advances to the earliest
// pending event; ties at the same instant resolve by lane (worker id), then by
// event creation order. Because only one context runs at a time and every
// hand-off goes through the queue, a run with the same inputs replays
// bit-identically.
//
// Worker-facing calls (AdvanceBy/Block) must only be made from inside a
// spawned body. Post/Wake may be called from bodies or from posted closures.
class Scheduler : public bench::ClockSource {
 public:
  using Closure = std::function<void()>;

  explicit Scheduler(int num_lanes);
  ~Scheduler();

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  bench::Ticks Now() const override { return now_; }
  bench::ClockMode Mode() const override { return bench::ClockMode::kVirtual; }

  // Registers the body for `lane`. All lanes must be spawned before Run().
  void Spawn(int lane, std::function<void()> body);

  // Drives the event loop until every lane finished. Rethrows the first
  // exception raised inside a body. Throws InvariantError if all remaining
  // lanes are blocked and no event is pending (deadlock).
  void Run();

  // Yields and resumes once virtual time has advanced by d (>= 0). The
  // sleep is not interruptible: Wake() never shortens a timed advance.
  void AdvanceBy(bench::Ticks d);

  // Yields until some other context calls Wake() on this lane. Spurious
  // wakeups are possible (callers re-check their condition in a loop).
  void Block(int lane);

  // Makes a lane parked in Block() runnable at the current virtual instant.
  // No-op if the lane is not parked in Block() when the wake event is
  // dispatched (stale wakes drop; sleeping lanes are left alone).
  void Wake(int lane);

  // Schedules `fn` to run on the driver at time `at`, ordered under `lane`.
  // Closures must not block; they may push messages, Wake lanes, and Post.
  void Post(bench::Ticks at, int lane, Closure fn);

  // Lane of the context calling into the scheduler right now (-1 on driver).
  int CurrentLane() const { return running_lane_; }

 private:
  // kSleeping = parked in AdvanceBy (only its own timer event resumes it);
  // kBlocked = parked in Block (only Wake events resume it).
  enum class LaneState { kUnspawned, kReady, kRunning, kBlocked, kSleeping,
                         kDone };

  struct Event {
    bench::Ticks at;
    int lane;
    uint64_t seq;
    bool timer;  // resumes a sleeping lane; false = wake for a blocked lane
    // kind: resume a lane (fn empty) or run a closure.
    Closure fn;
    bool operator>(const Event& o) const {
      if (at != o.at) return at > o.at;
      if (lane != o.lane) return lane > o.lane;
      return seq > o.seq;
    }
  };

  struct Lane {
    std::thread thread;
    LaneState state = LaneState::kUnspawned;
    std::condition_variable cv;
    std::exception_ptr error;
  };

  // Pre: lock held, called from a worker thread. Parks the calling lane and
  // returns once the driver grants it again. Throws ShutdownSignal when the
  // scheduler is tearing down.
  void YieldLocked(std::unique_lock<std::mutex>& lock, int lane);

  void PushEventLocked(bench::Ticks at, int lane, bool timer, Closure fn);

  mutable std::mutex mu_;
  std::condition_variable driver_cv_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::vector<Lane> lanes_;
  bench::Ticks now_ = 0;
  uint64_t next_seq_ = 0;
  int running_lane_ = -1;
  int live_lanes_ = 0;
  bool shutdown_ = false;
};

}  // namespace psbed::sim
