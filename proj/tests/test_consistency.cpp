#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "psbed/common/error.hpp"
#include "psbed/consistency/policy.hpp"

using psbed::consistency::ClusterClockView;
using psbed::consistency::MayProceed;
using psbed::consistency::SyncMode;
using psbed::consistency::SyncPolicy;

TEST_CASE("admission boundary is exactly the slack") {
  SyncPolicy ssp{SyncMode::kSsp, 3, false, false};
  // At the boundary: ahead by exactly slack is admitted.
  CHECK(MayProceed(3, 0, ssp));
  CHECK(MayProceed(13, 10, ssp));
  // One past the boundary blocks.
  CHECK_FALSE(MayProceed(4, 0, ssp));
  CHECK_FALSE(MayProceed(14, 10, ssp));
  // At or below the minimum always admits.
  CHECK(MayProceed(0, 0, ssp));
  CHECK(MayProceed(10, 10, ssp));
}

TEST_CASE("bsp admits only workers level with the minimum") {
  SyncPolicy bsp{SyncMode::kBsp, 0, false, false};
  CHECK(MayProceed(0, 0, bsp));
  CHECK(MayProceed(7, 7, bsp));
  CHECK_FALSE(MayProceed(1, 0, bsp));
  CHECK_FALSE(MayProceed(8, 7, bsp));
}

TEST_CASE("bsp is the slack-zero special case") {
  SyncPolicy bsp{SyncMode::kBsp, 0, false, false};
  SyncPolicy ssp0{SyncMode::kSsp, 0, false, false};
  for (int64_t min = 0; min < 5; ++min) {
    for (int64_t clock = min; clock < min + 4; ++clock) {
      CHECK(MayProceed(clock, min, bsp) == MayProceed(clock, min, ssp0));
    }
  }
}

TEST_CASE("a clock below the cluster minimum is a contradiction") {
  SyncPolicy ssp{SyncMode::kSsp, 2, false, false};
  CHECK_THROWS_AS(MayProceed(1, 2, ssp), psbed::InvariantError);
}

TEST_CASE("policy validation") {
  SyncPolicy bad_bsp{SyncMode::kBsp, 1, false, false};
  CHECK_THROWS_AS(bad_bsp.Validate(), psbed::InvariantError);
  SyncPolicy bad_ssp{SyncMode::kSsp, -1, false, false};
  CHECK_THROWS_AS(bad_ssp.Validate(), psbed::InvariantError);
  SyncPolicy ok_bsp{SyncMode::kBsp, 0, false, false};
  CHECK_NOTHROW(ok_bsp.Validate());
  SyncPolicy ok_ssp{SyncMode::kSsp, 0, false, false};
  CHECK_NOTHROW(ok_ssp.Validate());
}

TEST_CASE("mode names fold in the mitigation flags") {
  CHECK(SyncPolicy{SyncMode::kBsp, 0, false, false}.Name() == "bsp");
  CHECK(SyncPolicy{SyncMode::kSsp, 3, false, false}.Name() == "ssp");
  CHECK(SyncPolicy{SyncMode::kSsp, 3, true, false}.Name() == "ssp-rr");
  CHECK(SyncPolicy{SyncMode::kBsp, 0, false, true}.Name() == "bsp-spec");
  CHECK(SyncPolicy{SyncMode::kSsp, 3, true, true}.Name() == "ssp-rr-spec");
}

TEST_CASE("cluster clock view extremes") {
  ClusterClockView view{{5, 2, 9, 2, 7}};
  CHECK(view.MinClock() == 2);
  CHECK(view.MaxClock() == 9);
  ClusterClockView empty;
  CHECK_THROWS_AS(empty.MinClock(), psbed::InvariantError);
  CHECK_THROWS_AS(empty.MaxClock(), psbed::InvariantError);
}

TEST_CASE("gap bound under admission is slack plus one") {
  // Any schedule that only lets admitted workers advance keeps the spread
  // within slack + 1: a worker at min + slack may still finish (+1).
  for (int slack = 0; slack <= 3; ++slack) {
    SyncPolicy ssp{SyncMode::kSsp, slack, false, false};
    std::vector<int64_t> clocks(4, 0);
    // Greedy adversary: always advance the most-ahead admitted worker.
    for (int step = 0; step < 200; ++step) {
      int best = -1;
      const int64_t min = *std::min_element(clocks.begin(), clocks.end());
      for (int w = 0; w < 4; ++w) {
        if (!MayProceed(clocks[w], min, ssp)) continue;
        if (best < 0 || clocks[w] > clocks[best]) best = w;
      }
      REQUIRE(best >= 0);
      clocks[best] += 1;
      const auto [lo, hi] = std::minmax_element(clocks.begin(), clocks.end());
      CHECK(*hi - *lo <= slack + 1);
    }
  }
}
