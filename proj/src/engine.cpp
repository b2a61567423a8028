#include "psbed/runner/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "psbed/inject/disruptor.hpp"
#include "psbed/inject/straggler.hpp"
#include "psbed/mitigate/assignment.hpp"
#include "psbed/mitigate/cloning.hpp"
#include "psbed/mitigate/commit_gate.hpp"
#include "psbed/mitigate/progress.hpp"
#include "psbed/mitigate/reassignment.hpp"
#include "psbed/ps/client.hpp"
#include "psbed/ps/updates.hpp"
#include "psbed/sim/scheduler.hpp"

namespace psbed::runner {
namespace {

using bench::Ticks;

// ---------------------------------------------------------------------------
// Control plane

enum class MsgKind { kClock, kProgress, kIdle, kRr, kCloneAssign, kCloneDone };

struct EngineMsg {
  MsgKind kind = MsgKind::kClock;
  int from = -1;
  // kClock: finished clock value; kProgress / kCloneAssign / kCloneDone:
  // the iteration the payload refers to.
  int64_t iteration = 0;
  double fraction = 0.0;  // kProgress
  uint32_t pos = 0;       // kProgress: next unprocessed item
  mitigate::RrMsg rr;     // kRr
  int laggard = -1;       // kCloneAssign / kCloneDone
  Interval range;         // kCloneAssign: remainder to duplicate
};

// Message fabric plus time charging, specialized per clock mode. Addresses
// 0..W-1 are workers; address W is the coordinator.
class Ports {
 public:
  virtual ~Ports() = default;

  virtual void Send(int to, const EngineMsg& msg) = 0;
  // Removes and returns every pending message for `self`, arrival order.
  virtual std::vector<EngineMsg> Drain(int self) = 0;
  // Parks until a message arrived after the last Drain; may wake spuriously.
  virtual void WaitSignal(int self) = 0;
  // Consumes `d` ticks of the caller's time (virtual advance / real sleep).
  virtual void Charge(Ticks d) = 0;
  virtual const bench::ClockSource& clock() const = 0;

  void SetCoordinator(std::function<void(const EngineMsg&)> handler) {
    coordinator_ = std::move(handler);
  }

 protected:
  std::function<void(const EngineMsg&)> coordinator_;
};

class VirtualPorts final : public Ports {
 public:
  VirtualPorts(sim::Scheduler& sched, int num_workers, Ticks latency)
      : sched_(&sched),
        num_workers_(num_workers),
        latency_(latency),
        mail_(num_workers) {}

  void Send(int to, const EngineMsg& msg) override {
    // Deliveries are scheduler events: FIFO per (sender, receiver) pair and
    // globally ordered by (time, receiver lane, creation order).
    if (to == num_workers_) {
      if (!coordinator_) return;
      sched_->Post(sched_->Now() + latency_, to,
                   [this, msg] { coordinator_(msg); });
      return;
    }
    sched_->Post(sched_->Now() + latency_, to, [this, to, msg] {
      mail_[to].push_back(msg);
      sched_->Wake(to);
    });
  }

  std::vector<EngineMsg> Drain(int self) override {
    std::vector<EngineMsg> out(mail_[self].begin(), mail_[self].end());
    mail_[self].clear();
    return out;
  }

  void WaitSignal(int self) override {
    // Deliveries only run while every lane is parked, so checking the box
    // here cannot race with a push.
    if (!mail_[self].empty()) return;
    sched_->Block(self);
  }

  void Charge(Ticks d) override {
    if (d > 0) sched_->AdvanceBy(d);
  }

  const bench::ClockSource& clock() const override { return *sched_; }

 private:
  sim::Scheduler* sched_;
  int num_workers_;
  Ticks latency_;
  std::vector<std::deque<EngineMsg>> mail_;
};

class RealPorts final : public Ports {
 public:
  explicit RealPorts(int num_workers)
      : num_workers_(num_workers), last_seen_(num_workers, 0) {
    boxes_.reserve(num_workers);
    for (int i = 0; i < num_workers; ++i) {
      boxes_.push_back(std::make_unique<Box>());
    }
  }

  void Send(int to, const EngineMsg& msg) override {
    if (to == num_workers_) {
      if (!coordinator_) return;
      // Coordinator logic runs inline on the sender's thread; coord_mu_
      // serializes it. Lock order is coord_mu_ -> box.mu, never reversed.
      std::lock_guard<std::mutex> lock(coord_mu_);
      coordinator_(msg);
      return;
    }
    Box& b = *boxes_[to];
    {
      std::lock_guard<std::mutex> lock(b.mu);
      b.q.push_back(msg);
      ++b.epoch;
    }
    b.cv.notify_all();
  }

  std::vector<EngineMsg> Drain(int self) override {
    Box& b = *boxes_[self];
    std::lock_guard<std::mutex> lock(b.mu);
    std::vector<EngineMsg> out(b.q.begin(), b.q.end());
    b.q.clear();
    last_seen_[self] = b.epoch;
    return out;
  }

  void WaitSignal(int self) override {
    Box& b = *boxes_[self];
    std::unique_lock<std::mutex> lock(b.mu);
    const bool progressed =
        b.cv.wait_for(lock, std::chrono::seconds(30), [&] {
          return b.epoch != last_seen_[self] || poisoned_.load();
        });
    if (poisoned_.load()) {
      throw InvariantError("run aborted after a peer worker failed");
    }
    PSBED_CHECK_MSG(progressed, "no progress signal for 30s (stalled run)");
  }

  void Charge(Ticks d) override {
    if (d > 0) std::this_thread::sleep_for(std::chrono::microseconds(d));
  }

  const bench::ClockSource& clock() const override { return clock_; }

  // Unblocks every waiter after a worker failed so the run can unwind.
  void Poison() {
    poisoned_.store(true);
    for (auto& b : boxes_) b->cv.notify_all();
  }

 private:
  struct Box {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<EngineMsg> q;
    uint64_t epoch = 0;
  };

  bench::RealClock clock_;
  int num_workers_;
  std::vector<std::unique_ptr<Box>> boxes_;
  std::vector<uint64_t> last_seen_;
  std::mutex coord_mu_;
  std::atomic<bool> poisoned_{false};
};

// ---------------------------------------------------------------------------
// Speculation coordinator

// Watches clock/progress/idle traffic, pairs laggards with idle workers and
// dispatches clone assignments. Runs wherever the ports deliver to it: a
// driver closure under the virtual clock, the sender's thread in real runs.
class Coordinator {
 public:
  Coordinator(int num_workers, mitigate::ClonePolicy policy,
              const mitigate::WorkAssignment& base, Ports& ports)
      : num_workers_(num_workers),
        policy_(policy),
        base_(&base),
        ports_(&ports),
        cur_iter_(num_workers, 1),
        frac_(num_workers, 0.0),
        pos_(num_workers, 0),
        idle_(num_workers, false),
        busy_clone_(num_workers, false) {
    for (int w = 0; w < num_workers; ++w) pos_[w] = base.RangeOf(w).begin;
  }

  void Handle(const EngineMsg& m) {
    switch (m.kind) {
      case MsgKind::kClock: {
        const int w = m.from;
        cur_iter_[w] = m.iteration + 1;
        frac_[w] = 0.0;
        pos_[w] = base_->RangeOf(w).begin;
        idle_[w] = false;
        auto it = clone_of_.find(w);
        if (it != clone_of_.end() && it->second.iteration < cur_iter_[w]) {
          clone_of_.erase(it);  // the laggard caught up on its own
        }
        MaybeClone();
        break;
      }
      case MsgKind::kProgress: {
        const int w = m.from;
        if (m.iteration == cur_iter_[w]) {
          frac_[w] = m.fraction;
          pos_[w] = m.pos;
        }
        idle_[w] = false;
        MaybeClone();
        break;
      }
      case MsgKind::kIdle:
        idle_[m.from] = true;
        MaybeClone();
        break;
      case MsgKind::kCloneDone: {
        busy_clone_[m.from] = false;
        // A decliner is racing into its own iteration, not idle.
        idle_[m.from] = m.fraction == 1.0;
        auto it = clone_of_.find(m.laggard);
        if (it != clone_of_.end() && it->second.clone == m.from &&
            it->second.iteration == m.iteration) {
          clone_of_.erase(it);
        }
        // fraction 1.0 marks a completed remainder (declines carry 0.0).
        // A completed iteration must never be cloned again: the laggard's
        // progress stays stale while it sleeps off its delay, and with the
        // remainder already covered a re-clone would finish in zero time
        // and loop forever.
        if (m.fraction == 1.0) {
          auto& done = clone_done_[m.laggard];
          done = std::max(done, m.iteration);
        }
        MaybeClone();
        break;
      }
      default:
        break;
    }
  }

 private:
  struct Assigned {
    int clone = -1;
    int64_t iteration = 0;
  };

  void MaybeClone() {
    std::vector<double> progress(num_workers_);
    for (int w = 0; w < num_workers_; ++w) {
      progress[w] = static_cast<double>(cur_iter_[w] - 1) + frac_[w];
    }
    std::vector<int> idle;
    for (int w = 0; w < num_workers_; ++w) {
      if (idle_[w] && !busy_clone_[w]) idle.push_back(w);
    }
    std::vector<int> cloned;
    cloned.reserve(clone_of_.size());
    for (const auto& [laggard, a] : clone_of_) cloned.push_back(laggard);
    for (const auto& [laggard, done] : clone_done_) {
      if (done >= cur_iter_[laggard]) cloned.push_back(laggard);
    }
    const auto pairs =
        mitigate::SpeculativeClone(progress, idle, cloned, policy_);
    for (const auto& p : pairs) {
      const Interval rest{pos_[p.laggard], base_->RangeOf(p.laggard).end};
      if (rest.empty()) continue;
      clone_of_[p.laggard] = Assigned{p.clone, cur_iter_[p.laggard]};
      busy_clone_[p.clone] = true;
      idle_[p.clone] = false;
      EngineMsg m;
      m.kind = MsgKind::kCloneAssign;
      m.from = num_workers_;
      m.iteration = cur_iter_[p.laggard];
      m.laggard = p.laggard;
      m.range = rest;
      ports_->Send(p.clone, m);
    }
  }

  int num_workers_;
  mitigate::ClonePolicy policy_;
  const mitigate::WorkAssignment* base_;
  Ports* ports_;
  std::vector<int64_t> cur_iter_;
  std::vector<double> frac_;
  std::vector<uint32_t> pos_;
  std::vector<bool> idle_;
  std::vector<bool> busy_clone_;
  std::map<int, Assigned> clone_of_;  // laggard -> in-flight clone
  std::map<int, int64_t> clone_done_;  // laggard -> last clone-covered iter
};

// ---------------------------------------------------------------------------
// Worker

// Everything shared by the workers of one run.
struct RunShared {
  const RunConfig* cfg = nullptr;
  consistency::SyncPolicy policy;  // mitigation flags folded in
  workloads::Workload* workload = nullptr;
  ps::ParameterTable* table = nullptr;
  mitigate::CommitGate* gate = nullptr;
  const mitigate::WorkAssignment* assign = nullptr;
  Ports* ports = nullptr;
  int num_workers = 0;
  int64_t iterations = 0;
  double item_cost_us = 0.0;
  bool rr = false;
  bool spec = false;
  bool virtual_clock = true;

  // Per-worker output slots, index (iteration-1) * num_workers + worker.
  std::vector<bench::IterationRecord>* records = nullptr;
  std::vector<int64_t>* max_gap = nullptr;  // one slot per worker
};

class WorkerBody {
 public:
  WorkerBody(RunShared& sh, int w)
      : sh_(&sh),
        w_(w),
        client_(*sh.table, w, sh.policy,
                [this] {
                  sh_->ports->WaitSignal(w_);
                  Service();
                }),
        range_(sh.assign->RangeOf(w)),
        peer_(sh.num_workers),
        sink_([this](uint64_t slot, uint32_t value) {
          sh_->workload->WriteState(slot, value);
        }) {}

  void Run() {
    const int64_t total = sh_->iterations;
    for (iter_ = 1; iter_ <= total; ++iter_) {
      RunIteration();
    }
    DrainRun();
  }

 private:
  struct CloneTask {
    int laggard = -1;
    int64_t iteration = 0;
    uint32_t pos = 0;
    uint32_t end = 0;
    uint32_t chunk_items = 1;
    int64_t bound = 0;
  };

  Ticks Now() const { return sh_->ports->clock().Now(); }

  uint32_t ChunkItemsFor(const Interval& r) const {
    const double frac = sh_->cfg->mitigation.progress_broadcast_interval;
    const auto n = std::llround(frac * static_cast<double>(r.size()));
    return static_cast<uint32_t>(std::max<int64_t>(1, n));
  }

  double FractionDone() const {
    if (range_.size() == 0) return 1.0;
    return static_cast<double>(pos_ - range_.begin) /
           static_cast<double>(range_.size());
  }

  double MappedProgress(const mitigate::ProgressReport& r) const {
    if (r.iteration > iter_) return 1.0;
    if (r.iteration == iter_) return r.fraction_done;
    return 0.0;
  }

  // Compute-time multiplier for this worker's machine right now. Only the
  // virtual clock models disruption this way; real runs feel the actual
  // competing load.
  double ComputeFactor() const {
    const auto& s = sh_->cfg->straggler;
    if (!sh_->virtual_clock || !s.enabled ||
        s.pattern != inject::Pattern::kDisruptedMachine) {
      return 1.0;
    }
    return inject::DisruptComputeFactor(s, w_, sh_->num_workers, Now());
  }

  // Runs `work` and accounts its duration: charged model time under the
  // virtual clock, measured wall time under the real one.
  Ticks MeasureCompute(size_t n_items, double factor,
                       const std::function<void()>& work) {
    if (sh_->virtual_clock) {
      work();  // the math itself is real; only its duration is modeled
      const Ticks d = std::llround(static_cast<double>(n_items) *
                                   sh_->item_cost_us * factor);
      sh_->ports->Charge(d);
      return d;
    }
    const Ticks t0 = Now();
    work();
    return Now() - t0;
  }

  void FireDelay(const inject::DelayPlan& plan, int point) {
    if (plan.num_points == 0 || plan.total_delay == 0) return;
    const Ticks d = plan.PointDelay(point);
    if (d <= 0) return;
    const Ticks t0 = Now();
    sh_->ports->Charge(d);
    injected_ += Now() - t0;
  }

  // --- messaging ---------------------------------------------------------

  void SendRr(const mitigate::RrMsg& m) {
    EngineMsg e;
    e.kind = MsgKind::kRr;
    e.from = w_;
    e.rr = m;
    if (m.to >= 0) {
      sh_->ports->Send(m.to, e);
      return;
    }
    for (int p = 0; p < sh_->num_workers; ++p) {
      if (p != w_) sh_->ports->Send(p, e);
    }
  }

  void SendProgress(double fraction) {
    if (!sh_->rr && !sh_->spec) return;
    EngineMsg e;
    e.kind = MsgKind::kProgress;
    e.from = w_;
    e.iteration = iter_;
    e.fraction = fraction;
    e.pos = pos_;
    if (sh_->rr) {
      for (int p = 0; p < sh_->num_workers; ++p) {
        if (p != w_) sh_->ports->Send(p, e);
      }
    }
    if (sh_->spec) sh_->ports->Send(sh_->num_workers, e);
  }

  void SendIdle() {
    EngineMsg e;
    e.kind = MsgKind::kIdle;
    e.from = w_;
    e.iteration = iter_;
    sh_->ports->Send(sh_->num_workers, e);
  }

  void BroadcastClock(int64_t finished) {
    EngineMsg e;
    e.kind = MsgKind::kClock;
    e.from = w_;
    e.iteration = finished;
    for (int p = 0; p < sh_->num_workers; ++p) {
      if (p != w_) sh_->ports->Send(p, e);
    }
    if (sh_->spec) sh_->ports->Send(sh_->num_workers, e);
  }

  void Service() {
    for (const auto& m : sh_->ports->Drain(w_)) {
      switch (m.kind) {
        case MsgKind::kClock:
          peer_[m.from] =
              mitigate::ProgressReport{m.from, m.iteration, 1.0, Now()};
          break;
        case MsgKind::kProgress:
          peer_[m.from] = mitigate::ProgressReport{m.from, m.iteration,
                                                   m.fraction, Now()};
          break;
        case MsgKind::kRr:
          HandleRr(m.rr);
          break;
        case MsgKind::kCloneAssign: {
          if (!sh_->spec) break;
          CloneTask t;
          t.laggard = m.laggard;
          t.iteration = m.iteration;
          t.pos = m.range.begin;
          t.end = m.range.end;
          t.chunk_items = ChunkItemsFor(sh_->assign->RangeOf(m.laggard));
          t.bound =
              std::max<int64_t>(0, m.iteration - 1 - sh_->policy.slack);
          clone_tasks_.push_back(t);
          break;
        }
        case MsgKind::kCloneDone:
        case MsgKind::kIdle:
          break;  // wake-only here; kIdle is coordinator traffic
      }
    }
  }

  void HandleRr(const mitigate::RrMsg& r) {
    if (!sh_->rr) return;
    switch (r.kind) {
      case mitigate::RrMsgKind::kHelpRequest: {
        if (!help_ok_ || helper_.Busy() || requester_.HasActive()) break;
        auto ack = helper_.OnHelpRequest(
            r, w_, sh_->cfg->mitigation.shed_fraction);
        if (ack) {
          // Optimistic start: work the claim immediately. If another helper
          // won the grant, the cancel fully revokes this claim, and any
          // chunks committed meanwhile carried the same updates the winner
          // would produce, deduplicated at the gate.
          help_cursor_ = helper_.Tail().end;
          help_bound_ =
              std::max<int64_t>(0, r.iteration - 1 - sh_->policy.slack);
          help_chunk_items_ = ChunkItemsFor(sh_->assign->RangeOf(r.from));
          SendRr(*ack);
        }
        break;
      }
      case mitigate::RrMsgKind::kHelpAck: {
        auto res = requester_.OnHelpAck(r, pos_);
        for (const auto& m : res.out) SendRr(m);
        break;
      }
      case mitigate::RrMsgKind::kWorkDone:
        requester_.OnWorkDone(r);
        break;
      case mitigate::RrMsgKind::kCancel: {
        if (!helper_.Busy()) break;
        const int helpee = helper_.Helpee();
        const int64_t help_iter = helper_.HelpIteration();
        const uint64_t tag = helper_.Tag();
        const Interval tail = helper_.Tail();
        if (helper_.OnCancel(r)) {
          // Fully revoked: nothing left to do, which is a finished claim.
          // The requester needs the completion to close its shed.
          SendRr(mitigate::RrMsg{mitigate::RrMsgKind::kWorkDone, w_, helpee,
                                 help_iter, tag, tail});
        }
        break;
      }
    }
  }

  // --- side work (runs only inside admission / coverage waits) ------------

  bool ExecuteSideWork() {
    if (helper_.Busy()) {
      HelpChunk();
      return true;
    }
    if (!clone_tasks_.empty()) {
      CloneChunk();
      return true;
    }
    return false;
  }

  // One backward chunk of the helper claim. Backward order keeps the items
  // most at risk of revocation (the front, where the helpee advances) last.
  void HelpChunk() {
    const Interval tail = helper_.Tail();
    const int64_t help_iter = helper_.HelpIteration();
    if (help_cursor_ > tail.begin) {
      const uint32_t span =
          std::min<uint32_t>(help_chunk_items_, help_cursor_ - tail.begin);
      const uint32_t begin = help_cursor_ - span;
      items_.clear();
      uint32_t u = begin;
      while ((u = sh_->gate->NextUncovered(help_iter, u, help_cursor_)) <
             help_cursor_) {
        if (!helper_.ItemRevoked(u)) items_.push_back(u);
        ++u;
      }
      if (!items_.empty()) {
        chunk_.Clear();
        chunk_.iteration = help_iter;
        chunk_.producer = w_;
        chunk_.range = Interval{begin, help_cursor_};
        const workloads::TableBoundSource src(*sh_->table, help_bound_);
        side_comp_ += MeasureCompute(items_.size(), ComputeFactor(), [&] {
          sh_->workload->ProcessItems(src, help_iter, items_, &chunk_);
        });
        pending_flush_items_ += sh_->gate->Commit(chunk_, sink_).accepted_items;
      }
      help_cursor_ = begin;
    }
    if (help_cursor_ <= tail.begin) SendRr(helper_.Complete(w_));
  }

  // One forward chunk of the front clone task.
  void CloneChunk() {
    CloneTask& t = clone_tasks_.front();
    t.pos = sh_->gate->NextUncovered(t.iteration, t.pos, t.end);
    if (t.pos >= t.end) {
      FinishCloneTask(/*completed=*/true);
      return;
    }
    const uint32_t chunk_end = std::min(t.pos + t.chunk_items, t.end);
    items_.clear();
    uint32_t u = t.pos;
    while ((u = sh_->gate->NextUncovered(t.iteration, u, chunk_end)) <
           chunk_end) {
      items_.push_back(u);
      ++u;
    }
    if (!items_.empty()) {
      chunk_.Clear();
      chunk_.iteration = t.iteration;
      chunk_.producer = w_;
      chunk_.range = Interval{t.pos, chunk_end};
      const workloads::TableBoundSource src(*sh_->table, t.bound);
      side_comp_ += MeasureCompute(items_.size(), ComputeFactor(), [&] {
        sh_->workload->ProcessItems(src, t.iteration, items_, &chunk_);
      });
      pending_flush_items_ += sh_->gate->Commit(chunk_, sink_).accepted_items;
    }
    t.pos = chunk_end;
    if (t.pos >= t.end) FinishCloneTask(/*completed=*/true);
  }

  // `completed` means the remainder is fully covered (executed here or found
  // already committed); a decline reports 0.0 so the coordinator may still
  // pair the laggard with another clone.
  void FinishCloneTask(bool completed) {
    const CloneTask t = clone_tasks_.front();
    clone_tasks_.pop_front();
    EngineMsg done;
    done.kind = MsgKind::kCloneDone;
    done.from = w_;
    done.iteration = t.iteration;
    done.fraction = completed ? 1.0 : 0.0;
    done.laggard = t.laggard;
    sh_->ports->Send(sh_->num_workers, done);
    sh_->ports->Send(t.laggard, done);  // wakes a laggard parked on coverage
  }

  // Declines queued clone assignments with zero work: the worker has its own
  // iteration to run, and committed coverage is the only ground truth the
  // laggard relies on.
  void DropCloneTasks() {
    while (!clone_tasks_.empty()) FinishCloneTask(/*completed=*/false);
  }

  // --- reassignment at chunk boundaries -----------------------------------

  void RrStep() {
    if (!sh_->rr) return;
    if (requester_.HasActive() && !requester_.Granted()) {
      if (++boundaries_ungranted_ >= 2) {
        auto cancel = requester_.WithdrawOffer();
        if (cancel) SendRr(*cancel);
        boundaries_ungranted_ = 0;
      }
      return;
    }
    if (requester_.HasActive() || helper_.Busy()) return;
    std::vector<double> peers;
    peers.reserve(sh_->num_workers - 1);
    for (int p = 0; p < sh_->num_workers; ++p) {
      if (p != w_) peers.push_back(MappedProgress(peer_[p]));
    }
    if (peers.empty()) return;
    if (!mitigate::DetectStraggler(
            FractionDone(), peers, sh_->cfg->mitigation.detect_threshold)) {
      return;
    }
    const Interval remaining{pos_, range_.end};
    if (remaining.size() < 2) return;
    const uint64_t tag =
        (static_cast<uint64_t>(w_ + 1) << 32) | ++tag_counter_;
    SendRr(requester_.MakeRequest(w_, iter_, remaining, tag));
    boundaries_ungranted_ = 0;
  }

  // --- one iteration -------------------------------------------------------

  void RunIteration() {
    const Ticks iter_start = Now();
    own_comp_ = 0;
    side_comp_ = 0;
    injected_ = 0;
    comm_ = 0;

    // Admission. Helping and cloning are legal while blocked here; a claimed
    // help tail must finish before this worker moves on (the claim is
    // exclusive, so walking away would strand the helpee).
    help_ok_ = true;
    bool sent_idle = false;
    while (true) {
      Service();
      if (client_.Admitted() && !helper_.Busy()) break;
      if (ExecuteSideWork()) continue;
      if (sh_->spec && !sent_idle) {
        SendIdle();
        sent_idle = true;
      }
      sh_->ports->WaitSignal(w_);
    }
    help_ok_ = false;
    DropCloneTasks();

    const int64_t bound = client_.PinnedBound();
    pos_ = range_.begin;

    // Plan the chunk grid and this iteration's injected delays. The first
    // iteration calibrates the nominal cost, so it is never delayed.
    const uint32_t chunk_items = ChunkItemsFor(range_);
    const int planned_chunks =
        range_.size() == 0
            ? 0
            : static_cast<int>((range_.size() + chunk_items - 1) /
                               chunk_items);
    const int num_points = 2 * planned_chunks + 1;
    inject::DelayPlan plan;
    if (iter_ > 1) {
      plan = inject::InjectStraggler(sh_->cfg->straggler, w_, iter_,
                                     nominal_prev_, num_points);
    }
    boundaries_ungranted_ = 0;
    SendProgress(0.0);

    // Chunk loop over this worker's own range.
    const workloads::TableBoundSource source(*sh_->table, bound);
    int chunk_idx = 0;
    while (true) {
      uint32_t limit = range_.end;
      if (sh_->rr && requester_.Granted() &&
          requester_.Iteration() == iter_) {
        limit = std::min(limit, requester_.GrantedTail().begin);
      }
      pos_ = sh_->gate->NextUncovered(iter_, pos_, limit);
      if (pos_ >= limit) break;
      const uint32_t chunk_end = std::min(pos_ + chunk_items, limit);
      items_.clear();
      uint32_t u = pos_;
      while ((u = sh_->gate->NextUncovered(iter_, u, chunk_end)) <
             chunk_end) {
        items_.push_back(u);
        ++u;
      }
      FireDelay(plan, 2 * chunk_idx);
      chunk_.Clear();
      chunk_.iteration = iter_;
      chunk_.producer = w_;
      chunk_.range = Interval{pos_, chunk_end};
      own_comp_ += MeasureCompute(items_.size(), ComputeFactor(), [&] {
        sh_->workload->ProcessItems(source, iter_, items_, &chunk_);
      });
      FireDelay(plan, 2 * chunk_idx + 1);
      pending_flush_items_ += sh_->gate->Commit(chunk_, sink_).accepted_items;
      pos_ = chunk_end;
      ++chunk_idx;
      SendProgress(FractionDone());
      Service();
      RrStep();
    }

    // Coverage. An ungranted offer is withdrawn (nothing left to shed); a
    // granted tail belongs to the helper and is awaited here.
    if (sh_->rr) {
      auto cancel = requester_.WithdrawOffer();
      if (cancel) SendRr(*cancel);
    }
    SendProgress(1.0);
    help_ok_ = true;
    while (true) {
      Service();
      if (sh_->gate->RangeCovered(iter_, range_)) break;
      if (ExecuteSideWork()) continue;
      sh_->ports->WaitSignal(w_);
    }
    help_ok_ = false;

    // Flush + clock.
    FireDelay(plan, num_points - 1);
    const Ticks flush = std::llround(
        sh_->cfg->cost.comm_base_us +
        sh_->cfg->cost.comm_per_item_us *
            static_cast<double>(pending_flush_items_));
    pending_flush_items_ = 0;
    const Ticks comm_t0 = Now();
    sh_->ports->Charge(flush);
    comm_ += Now() - comm_t0;

    const int64_t new_clock = client_.ClockNoFlush();
    PSBED_CHECK_MSG(new_clock == iter_, "clock advanced out of step");
    BroadcastClock(iter_);

    const auto view = sh_->table->ClockView();
    const auto [mn, mx] = std::minmax_element(view.begin(), view.end());
    const int64_t gap = *mx - *mn;
    PSBED_CHECK_MSG(gap <= sh_->policy.slack + 1,
                    "clock spread exceeded slack + 1");
    auto& worst = (*sh_->max_gap)[w_];
    worst = std::max(worst, gap);
    if (*mn == iter_) {
      // This worker sealed the iteration; every dataset item must have
      // committed exactly once for it.
      sh_->gate->VerifyIterationComplete(iter_);
    }

    const Ticks wall = Now() - iter_start;
    const Ticks comp = own_comp_ + side_comp_ + injected_;
    Ticks wait = wall - comp - comm_;
    if (sh_->virtual_clock) {
      PSBED_CHECK_MSG(wait >= 0, "iteration accounting went negative");
    } else if (wait < 0) {
      wait = 0;
    }
    (*sh_->records)[static_cast<size_t>(iter_ - 1) * sh_->num_workers + w_] =
        bench::IterationRecord{iter_, w_, comp, comm_, wait};
    nominal_prev_ = own_comp_ + comm_;
  }

  // After the last clock: stay responsive until every worker finished, so
  // late help claims and clone tasks still complete. This time belongs to
  // no iteration record.
  void DrainRun() {
    help_ok_ = true;
    bool sent_idle = false;
    while (true) {
      Service();
      if (sh_->table->MinClock() >= sh_->iterations && !helper_.Busy() &&
          clone_tasks_.empty()) {
        break;
      }
      if (ExecuteSideWork()) continue;
      if (sh_->spec && !sent_idle) {
        SendIdle();
        sent_idle = true;
      }
      sh_->ports->WaitSignal(w_);
    }
    help_ok_ = false;
  }

  RunShared* sh_;
  int w_;
  ps::TableClient client_;
  Interval range_;
  std::vector<mitigate::ProgressReport> peer_;
  mitigate::CommitGate::StateSink sink_;

  int64_t iter_ = 1;
  uint32_t pos_ = 0;
  Ticks own_comp_ = 0;
  Ticks side_comp_ = 0;
  Ticks injected_ = 0;
  Ticks comm_ = 0;
  Ticks nominal_prev_ = 0;
  int64_t pending_flush_items_ = 0;

  mitigate::ShedRequester requester_;
  mitigate::ShedHelper helper_;
  uint64_t tag_counter_ = 0;
  int boundaries_ungranted_ = 0;
  bool help_ok_ = false;
  uint32_t help_cursor_ = 0;
  uint32_t help_chunk_items_ = 1;
  int64_t help_bound_ = 0;

  std::deque<CloneTask> clone_tasks_;
  ps::ChunkUpdates chunk_;
  std::vector<uint32_t> items_;
};

// ---------------------------------------------------------------------------
// Assembly

consistency::SyncPolicy FoldPolicy(const RunConfig& cfg) {
  consistency::SyncPolicy p = cfg.sync;
  p.reassignment = cfg.mitigation.reassignment;
  p.speculation = cfg.mitigation.speculation;
  return p;
}

mitigate::WorkAssignment BuildAssignment(const RunConfig& cfg,
                                         uint32_t num_items) {
  const int w = cfg.workers;
  if (cfg.straggler.enabled &&
      cfg.straggler.pattern == inject::Pattern::kPersistent) {
    if (num_items % static_cast<uint32_t>(w) != 0) {
      throw ConfigError(
          "persistent pattern needs the item count divisible by workers");
    }
    const uint32_t base = num_items / static_cast<uint32_t>(w);
    std::vector<uint32_t> counts(w);
    for (int i = 0; i < w; ++i) {
      counts[i] =
          inject::PersistentAssignmentScale(cfg.straggler, i, base, w);
    }
    auto a = mitigate::WorkAssignment::FromCounts(counts);
    a.Validate();
    PSBED_CHECK_MSG(a.num_items() == num_items,
                    "persistent split lost or invented items");
    return a;
  }
  return mitigate::WorkAssignment::EvenSplit(num_items, w);
}

// Real-clock companion thread for the disrupted-machine pattern: at every
// triggered window it spawns busy-spin competitors for one period. The spin
// threads contend process-wide, so every worker feels some of the load.
class DisruptionManager {
 public:
  DisruptionManager(const inject::StragglerConfig& cfg, int machines,
                    const bench::ClockSource& clock) {
    thread_ = std::thread([this, cfg, machines, &clock] {
      const Ticks period =
          std::max<Ticks>(1, std::llround(cfg.period_s *
                                          bench::kTicksPerSecond));
      const int cores =
          std::max(1u, std::thread::hardware_concurrency());
      int64_t window = 0;
      std::unique_ptr<inject::Disruptor> active;
      while (!stop_.load()) {
        const Ticks start = window * period;
        while (!stop_.load() && clock.Now() < start) {
          std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        if (stop_.load()) break;
        active.reset();
        if (inject::DisruptWindowTriggered(cfg, window) &&
            inject::DisruptedMachineInWindow(cfg, window, machines) >= 0) {
          active = std::make_unique<inject::Disruptor>(cfg.delay_percent,
                                                       cores, period);
        }
        ++window;
      }
    });
  }

  ~DisruptionManager() {
    stop_.store(true);
    thread_.join();
  }

 private:
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

void FlushPartialRecords(const RunConfig& cfg,
                         const std::vector<bench::IterationRecord>& grid,
                         const std::string& outdir) {
  try {
    std::vector<bench::IterationRecord> filled;
    for (const auto& r : grid) {
      if (r.iteration > 0) filled.push_back(r);
    }
    std::filesystem::create_directories(outdir);
    std::ofstream out(std::filesystem::path(outdir) / "records.csv");
    out << bench::RecordsCsv(cfg.EffectiveRunId(), FoldPolicy(cfg).Name(),
                             cfg.PatternLabel(), filled);
  } catch (...) {
    // Evidence flushing is best-effort; the original error wins.
  }
}

RunResult RunExperimentInternal(const RunConfig& cfg,
                                const std::string* outdir) {
  cfg.Validate();
  const int w = cfg.workers;
  const int64_t t = cfg.iterations;
  const consistency::SyncPolicy policy = FoldPolicy(cfg);

  auto workload = MakeWorkload(cfg.workload, cfg.seed);
  const auto& info = workload->Info();
  PSBED_CHECK_MSG(info.num_items > 0, "workload produced no items");

  auto assign = BuildAssignment(cfg, info.num_items);
  assign.Validate();

  ps::TableConfig tc;
  tc.num_shards = cfg.shards == 0 ? w : cfg.shards;
  tc.dimension = info.dimension;
  tc.capacity = info.table_capacity;
  // Clones may read one assignment-time window behind an already-advanced
  // minimum clock, so staged iterations are retained for 2 x slack + 1.
  tc.retain_window = 2 * policy.slack + 1;
  tc.order = cfg.commit_order;
  ps::ParameterTable table(tc);
  workload->InitTable(&table);

  mitigate::CommitGate gate(info.num_items, table);

  RunShared shared;
  shared.cfg = &cfg;
  shared.policy = policy;
  shared.workload = workload.get();
  shared.table = &table;
  shared.gate = &gate;
  shared.assign = &assign;
  shared.num_workers = w;
  shared.iterations = t;
  shared.item_cost_us = cfg.workload.item_cost_us > 0.0
                            ? cfg.workload.item_cost_us
                            : info.default_item_cost_us;
  shared.rr = cfg.mitigation.reassignment;
  shared.spec = cfg.mitigation.speculation;
  shared.virtual_clock = cfg.clock_mode == bench::ClockMode::kVirtual;

  std::vector<bench::IterationRecord> grid(static_cast<size_t>(t) * w);
  std::vector<int64_t> gaps(w, 0);
  shared.records = &grid;
  shared.max_gap = &gaps;

  mitigate::ClonePolicy clone_policy;
  clone_policy.lag_threshold = cfg.mitigation.clone_lag_threshold;
  clone_policy.max_clones = cfg.mitigation.max_clones;

  RunResult res;
  res.run_id = cfg.EffectiveRunId();
  res.mode = policy.Name();
  res.pattern = cfg.PatternLabel();
  res.workers = w;
  res.iterations = t;

  try {
    if (shared.virtual_clock) {
      sim::Scheduler sched(w);
      VirtualPorts ports(sched, w,
                         std::llround(cfg.cost.control_latency_us));
      shared.ports = &ports;
      std::unique_ptr<Coordinator> coord;
      if (shared.spec) {
        coord = std::make_unique<Coordinator>(w, clone_policy, assign, ports);
        ports.SetCoordinator(
            [&coord](const EngineMsg& m) { coord->Handle(m); });
      }
      std::vector<std::unique_ptr<WorkerBody>> bodies;
      bodies.reserve(w);
      for (int i = 0; i < w; ++i) {
        bodies.push_back(std::make_unique<WorkerBody>(shared, i));
      }
      for (int i = 0; i < w; ++i) {
        sched.Spawn(i, [&bodies, i] { bodies[i]->Run(); });
      }
      sched.Run();
      res.wall_ticks = sched.Now();
    } else {
      RealPorts ports(w);
      shared.ports = &ports;
      std::unique_ptr<Coordinator> coord;
      if (shared.spec) {
        coord = std::make_unique<Coordinator>(w, clone_policy, assign, ports);
        ports.SetCoordinator(
            [&coord](const EngineMsg& m) { coord->Handle(m); });
      }
      std::unique_ptr<DisruptionManager> disruption;
      if (cfg.straggler.enabled &&
          cfg.straggler.pattern == inject::Pattern::kDisruptedMachine) {
        disruption = std::make_unique<DisruptionManager>(cfg.straggler, w,
                                                         ports.clock());
      }
      std::vector<std::unique_ptr<WorkerBody>> bodies;
      bodies.reserve(w);
      for (int i = 0; i < w; ++i) {
        bodies.push_back(std::make_unique<WorkerBody>(shared, i));
      }
      std::exception_ptr first_error;
      std::mutex err_mu;
      std::vector<std::thread> threads;
      threads.reserve(w);
      for (int i = 0; i < w; ++i) {
        threads.emplace_back([&, i] {
          try {
            bodies[i]->Run();
          } catch (...) {
            {
              std::lock_guard<std::mutex> lock(err_mu);
              if (!first_error) first_error = std::current_exception();
            }
            ports.Poison();
          }
        });
      }
      for (auto& th : threads) th.join();
      disruption.reset();
      if (first_error) std::rethrow_exception(first_error);
      res.wall_ticks = ports.clock().Now();
    }
  } catch (const InvariantError&) {
    if (outdir != nullptr) FlushPartialRecords(cfg, grid, *outdir);
    throw;
  }

  res.records.assign(grid.begin(), grid.end());
  res.iter_time_ticks = bench::ComputeIterationTime(res.records, w, t);
  res.waste_ticks = bench::ComputeWastedTime(res.records);
  res.max_clock_gap = *std::max_element(gaps.begin(), gaps.end());
  res.objective.reserve(t);
  for (int64_t i = 1; i <= t; ++i) {
    res.objective.push_back(workload->FinalObjective(gate.ObjectiveOf(i)));
  }
  res.objective_label = workload->ObjectiveLabel();
  res.clamp_incidents = gate.TotalClampIncidents();
  table.FillSnapshot(t, &res.final_table);
  return res;
}

}  // namespace

double RunResult::TrailingAvgIterMs() const {
  const int64_t skip = std::min<int64_t>(5, iterations - 1);
  std::vector<Ticks> max_comp(iterations, 0);
  std::vector<Ticks> max_comm(iterations, 0);
  for (const auto& r : records) {
    auto& comp = max_comp[r.iteration - 1];
    auto& comm = max_comm[r.iteration - 1];
    comp = std::max(comp, r.comp_ticks);
    comm = std::max(comm, r.comm_ticks);
  }
  Ticks sum = 0;
  for (int64_t i = skip; i < iterations; ++i) {
    sum += max_comp[i] + max_comm[i];
  }
  return static_cast<double>(sum) /
         (static_cast<double>(iterations - skip) * 1000.0);
}

RunResult RunExperiment(const RunConfig& config) {
  return RunExperimentInternal(config, nullptr);
}

RunResult RunExperiment(const RunConfig& config, const std::string& outdir) {
  return RunExperimentInternal(config, &outdir);
}

}  // namespace psbed::runner
