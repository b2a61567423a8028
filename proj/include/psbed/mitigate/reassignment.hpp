#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/common/interval.hpp"
#include "psbed/mitigate/assignment.hpp"

namespace psbed::mitigate {

// Wire vocabulary of the reassignment protocol. A detected straggler
// broadcasts HELP_REQUEST carrying its remaining interval; an eligible peer
// answers HELP_ACK claiming the tail; the straggler grants the first ACK and
// CANCELs the rest; the helper reports WORK_DONE when its claim is finished.
// CANCEL also revokes portions the straggler finished first. Messages are
// matched by `tag` (unique per request) so duplicates and stale traffic are
// ignored idempotently.
enum class RrMsgKind { kHelpRequest, kHelpAck, kWorkDone, kCancel };

struct RrMsg {
  RrMsgKind kind = RrMsgKind::kHelpRequest;
  int from = -1;
  int to = -1;  // -1 = broadcast
  int64_t iteration = 0;
  uint64_t tag = 0;
  Interval interval;
};

// Straggler-side half of the protocol: owns the lifecycle of one outstanding
// shed at a time (request -> grant -> done / cancel). Re-requesting after a
// completed shed is allowed; two sheds can never be in flight at once.
class ShedRequester {
 public:
  struct StepResult {
    std::vector<RrMsg> out;
    bool newly_granted = false;
  };

  bool HasActive() const { return active_; }
  bool Granted() const { return active_ && granted_helper_ >= 0; }

  // Items >= this limit now belong to the helper; the straggler must not
  // process them. UINT32_MAX while nothing is granted.
  uint32_t WorkLimit() const {
    return Granted() ? tail_.begin : UINT32_MAX;
  }
  const Interval& GrantedTail() const {
    PSBED_CHECK_MSG(Granted(), "no granted tail");
    return tail_;
  }
  int GrantedHelper() const { return granted_helper_; }
  // Iteration of the active (or last) request; work limits only apply to it.
  int64_t Iteration() const { return iteration_; }

  // Broadcasts a request for the current remaining interval. Pre: no active
  // request and at least 2 remaining items (shedding one item is pointless).
  RrMsg MakeRequest(int self, int64_t iteration, const Interval& remaining,
                    uint64_t tag) {
    PSBED_CHECK_MSG(!active_, "a shed is already in flight");
    PSBED_CHECK_MSG(remaining.size() >= 2, "nothing worth shedding");
    active_ = true;
    self_ = self;
    iteration_ = iteration;
    tag_ = tag;
    offered_ = remaining;
    granted_helper_ = -1;
    return RrMsg{RrMsgKind::kHelpRequest, self, -1, iteration, tag, remaining};
  }

  // First matching ACK wins the tail; later or stale ACKs are answered with
  // CANCEL so the losing helper abandons. `position` is the straggler's own
  // next unprocessed item — anything it already finished inside the tail is
  // revoked immediately.
  StepResult OnHelpAck(const RrMsg& ack, uint32_t position) {
    StepResult r;
    if (!active_ || ack.tag != tag_) {
      // Unknown or already-closed request: refuse the claim.
      r.out.push_back(RrMsg{RrMsgKind::kCancel, self_, ack.from,
                            ack.iteration, ack.tag, ack.interval});
      return r;
    }
    if (granted_helper_ >= 0) {
      if (ack.from == granted_helper_) return r;  // duplicate of the grant
      r.out.push_back(RrMsg{RrMsgKind::kCancel, self_, ack.from, iteration_,
                            tag_, ack.interval});
      return r;
    }
    granted_helper_ = ack.from;
    tail_ = ack.interval;
    r.newly_granted = true;
    if (position > tail_.begin) {
      // The straggler outran the offer before the grant arrived; revoke the
      // part it already finished.
      const Interval overlap{tail_.begin, std::min(position, tail_.end)};
      r.out.push_back(RrMsg{RrMsgKind::kCancel, self_, granted_helper_,
                            iteration_, tag_, overlap});
    }
    return r;
  }

  // WORK_DONE from the granted helper closes the shed. Duplicates and
  // mismatched tags are no-ops.
  bool OnWorkDone(const RrMsg& done) {
    if (!active_ || done.tag != tag_ || done.from != granted_helper_) {
      return false;
    }
    active_ = false;
    granted_helper_ = -1;
    return true;
  }

  // Revokes an ungranted offer (the straggler finished by itself). Returns
  // the CANCEL broadcast; later ACKs bounce off the tag check.
  std::optional<RrMsg> WithdrawOffer() {
    if (!active_ || granted_helper_ >= 0) return std::nullopt;
    active_ = false;
    return RrMsg{RrMsgKind::kCancel, self_, -1, iteration_, tag_, offered_};
  }

 private:
  bool active_ = false;
  int self_ = -1;
  int64_t iteration_ = 0;
  uint64_t tag_ = 0;
  Interval offered_;
  Interval tail_;
  int granted_helper_ = -1;
};

// Helper-side half: claims at most one tail at a time, tracks revoked
// portions, and decides when the claim is finished or abandoned.
class ShedHelper {
 public:
  bool Busy() const { return helping_; }
  const Interval& Tail() const {
    PSBED_CHECK_MSG(helping_, "not helping");
    return tail_;
  }
  int Helpee() const { return helpee_; }
  int64_t HelpIteration() const { return iteration_; }
  uint64_t Tag() const { return tag_; }

  // Answers a broadcast request if this worker is free. The claimed tail is
  // derived from the request deterministically, so both sides agree on it.
  std::optional<RrMsg> OnHelpRequest(const RrMsg& req, int self,
                                     double shed_fraction) {
    if (helping_) return std::nullopt;
    const Interval tail = ShedTail(req.interval, shed_fraction);
    if (tail.empty()) return std::nullopt;
    helping_ = true;
    helpee_ = req.from;
    iteration_ = req.iteration;
    tag_ = req.tag;
    tail_ = tail;
    canceled_.Clear();
    return RrMsg{RrMsgKind::kHelpAck, self, req.from, req.iteration, req.tag,
                 tail};
  }

  // Marks part of the claim revoked. Returns true if the whole claim is now
  // revoked (the helper abandons and discards buffered work).
  bool OnCancel(const RrMsg& cancel) {
    if (!helping_ || cancel.tag != tag_) return false;
    canceled_.Union(cancel.interval);
    if (canceled_.CoversAll(tail_)) {
      helping_ = false;
      return true;
    }
    return false;
  }

  bool ItemRevoked(uint32_t item) const {
    return helping_ && canceled_.Contains(item);
  }

  // Finishes the claim: emits WORK_DONE and clears the state.
  RrMsg Complete(int self) {
    PSBED_CHECK_MSG(helping_, "completing without a claim");
    helping_ = false;
    return RrMsg{RrMsgKind::kWorkDone, self, helpee_, iteration_, tag_, tail_};
  }

  void Abandon() { helping_ = false; }

 private:
  bool helping_ = false;
  int helpee_ = -1;
  int64_t iteration_ = 0;
  uint64_t tag_ = 0;
  Interval tail_;
  IntervalSet canceled_;
};

}  // namespace psbed::mitigate
