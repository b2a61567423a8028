#include "psbed/sim/scheduler.hpp"

#include <utility>

#include "psbed/common/error.hpp"

namespace psbed::sim {

namespace {
// Thrown inside parked bodies when the scheduler tears down early (e.g. after
// a failed run) so their stacks unwind and the threads can be joined.
struct ShutdownSignal {};
}  // namespace

Scheduler::Scheduler(int num_lanes) : lanes_(num_lanes) {
  PSBED_CHECK(num_lanes > 0);
}

Scheduler::~Scheduler() {
  {
    std::unique_lock<std::mutex> lock(mu_);
    shutdown_ = true;
    for (auto& lane : lanes_) lane.cv.notify_all();
  }
  for (auto& lane : lanes_) {
    if (lane.thread.joinable()) lane.thread.join();
  }
}

void Scheduler::Spawn(int lane, std::function<void()> body) {
  std::unique_lock<std::mutex> lock(mu_);
  PSBED_CHECK(lane >= 0 && lane < static_cast<int>(lanes_.size()));
  PSBED_CHECK_MSG(lanes_[lane].state == LaneState::kUnspawned,
                  "lane spawned twice");
  lanes_[lane].state = LaneState::kBlocked;
  ++live_lanes_;
  // Initial resume at t=0 in lane order makes startup deterministic.
  PushEventLocked(0, lane, /*timer=*/false, nullptr);
  lanes_[lane].thread = std::thread([this, lane, body = std::move(body)] {
    {
      // Park until the driver grants the first slice.
      std::unique_lock<std::mutex> lk(mu_);
      Lane& me = lanes_[lane];
      while (me.state != LaneState::kRunning && !shutdown_) me.cv.wait(lk);
      if (shutdown_) {
        me.state = LaneState::kDone;
        --live_lanes_;
        driver_cv_.notify_all();
        return;
      }
    }
    try {
      body();
    } catch (const ShutdownSignal&) {
      // Torn down mid-run; nothing to record.
    } catch (...) {
      std::unique_lock<std::mutex> lk(mu_);
      lanes_[lane].error = std::current_exception();
    }
    std::unique_lock<std::mutex> lk(mu_);
    lanes_[lane].state = LaneState::kDone;
    --live_lanes_;
    running_lane_ = -1;
    driver_cv_.notify_all();
  });
}

void Scheduler::PushEventLocked(bench::Ticks at, int lane, bool timer,
                                Closure fn) {
  events_.push(Event{at, lane, next_seq_++, timer, std::move(fn)});
}

void Scheduler::Post(bench::Ticks at, int lane, Closure fn) {
  std::unique_lock<std::mutex> lock(mu_);
  PSBED_CHECK_MSG(at >= now_, "closure scheduled in the past");
  PSBED_CHECK(fn != nullptr);
  PushEventLocked(at, lane, /*timer=*/false, std::move(fn));
}

void Scheduler::Wake(int lane) {
  std::unique_lock<std::mutex> lock(mu_);
  PSBED_CHECK(lane >= 0 && lane < static_cast<int>(lanes_.size()));
  // Dispatch decides whether the lane is still blocked; stale wakes drop.
  PushEventLocked(now_, lane, /*timer=*/false, nullptr);
}

void Scheduler::YieldLocked(std::unique_lock<std::mutex>& lock, int lane) {
  Lane& me = lanes_[lane];
  running_lane_ = -1;
  driver_cv_.notify_all();
  while (me.state != LaneState::kRunning && !shutdown_) me.cv.wait(lock);
  if (shutdown_) throw ShutdownSignal{};
}

void Scheduler::AdvanceBy(bench::Ticks d) {
  std::unique_lock<std::mutex> lock(mu_);
  PSBED_CHECK_MSG(d >= 0, "cannot advance the virtual clock backwards");
  const int lane = running_lane_;
  PSBED_CHECK_MSG(lane >= 0, "AdvanceBy called outside a worker context");
  Lane& me = lanes_[lane];
  me.state = LaneState::kSleeping;
  PushEventLocked(now_ + d, lane, /*timer=*/true, nullptr);
  YieldLocked(lock, lane);
}

void Scheduler::Block(int lane) {
  std::unique_lock<std::mutex> lock(mu_);
  PSBED_CHECK_MSG(running_lane_ == lane, "Block called from the wrong lane");
  Lane& me = lanes_[lane];
  me.state = LaneState::kBlocked;
  YieldLocked(lock, lane);
}

void Scheduler::Run() {
  std::unique_lock<std::mutex> lock(mu_);
  while (true) {
    if (live_lanes_ == 0) break;
    if (events_.empty()) {
      // Every live lane is parked and nothing is pending: true deadlock.
      throw InvariantError(
          "deadlock: all workers blocked with no pending events");
    }
    Event ev = events_.top();
    events_.pop();
    PSBED_CHECK(ev.at >= now_);
    now_ = ev.at;
    if (ev.fn) {
      // Closures run on the driver; they may Post/Wake but never block.
      // The lock drops while the closure runs (no lane can execute
      // concurrently, and Post/Wake re-acquire it).
      running_lane_ = -1;
      lock.unlock();
      ev.fn();
      lock.lock();
      continue;
    }
    Lane& lane = lanes_[ev.lane];
    // Timers resume exactly the AdvanceBy park they were created by; wakes
    // resume only Block parks. Anything else is stale and drops.
    const LaneState expect =
        ev.timer ? LaneState::kSleeping : LaneState::kBlocked;
    if (lane.state != expect) continue;
    lane.state = LaneState::kRunning;
    running_lane_ = ev.lane;
    lane.cv.notify_all();
    while (running_lane_ == ev.lane && lane.state == LaneState::kRunning) {
      driver_cv_.wait(lock);
    }
    if (lane.state == LaneState::kDone && lane.error) {
      shutdown_ = true;
      for (auto& l : lanes_) l.cv.notify_all();
      // Give remaining parked lanes a chance to unwind before rethrowing.
      while (live_lanes_ > 0) driver_cv_.wait(lock);
      std::rethrow_exception(lane.error);
    }
  }
  // Surface errors from lanes that finished without the driver noticing
  // (e.g. a failure on the very last slice).
  for (auto& lane : lanes_) {
    if (lane.error) std::rethrow_exception(lane.error);
  }
}

}  // namespace psbed::sim
