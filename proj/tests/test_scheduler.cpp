#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "psbed/common/error.hpp"
#include "psbed/sim/scheduler.hpp"

using psbed::bench::Ticks;
using psbed::sim::Scheduler;

TEST_CASE("virtual time starts at zero and advances by sleeps") {
  Scheduler sched(1);
  std::vector<Ticks> seen;
  sched.Spawn(0, [&] {
    seen.push_back(sched.Now());
    sched.AdvanceBy(100);
    seen.push_back(sched.Now());
    sched.AdvanceBy(0);
    seen.push_back(sched.Now());
    sched.AdvanceBy(23);
    seen.push_back(sched.Now());
  });
  sched.Run();
  CHECK(seen == std::vector<Ticks>{0, 100, 100, 123});
}

TEST_CASE("lanes interleave by time with ties broken by lane id") {
  Scheduler sched(3);
  std::vector<int> order;
  // Lane 2 spawned first must still lose the t=0 tie to lanes 0 and 1.
  for (int lane : {2, 0, 1}) {
    sched.Spawn(lane, [&, lane] {
      order.push_back(lane);
      sched.AdvanceBy(10 * (lane + 1));
      order.push_back(lane);
    });
  }
  sched.Run();
  CHECK(order == std::vector<int>{0, 1, 2, 0, 1, 2});
}

TEST_CASE("two identical runs replay the same trace") {
  auto run_once = [] {
    Scheduler sched(4);
    std::vector<std::pair<int, Ticks>> trace;
    for (int lane = 0; lane < 4; ++lane) {
      sched.Spawn(lane, [&, lane] {
        for (int step = 0; step < 5; ++step) {
          trace.emplace_back(lane, sched.Now());
          sched.AdvanceBy(7 * lane + step);
        }
      });
    }
    sched.Run();
    return trace;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("block parks until wake") {
  Scheduler sched(2);
  std::vector<std::string> log;
  bool signal = false;
  sched.Spawn(0, [&] {
    while (!signal) {
      log.push_back("block@" + std::to_string(sched.Now()));
      sched.Block(0);
    }
    log.push_back("woke@" + std::to_string(sched.Now()));
  });
  sched.Spawn(1, [&] {
    sched.AdvanceBy(50);
    signal = true;
    sched.Wake(0);
  });
  sched.Run();
  CHECK(log == std::vector<std::string>{"block@0", "woke@50"});
}

TEST_CASE("wake does not shorten a timed sleep") {
  Scheduler sched(2);
  Ticks resumed_at = -1;
  sched.Spawn(0, [&] {
    sched.AdvanceBy(100);
    resumed_at = sched.Now();
  });
  sched.Spawn(1, [&] {
    sched.AdvanceBy(10);
    sched.Wake(0);  // lane 0 is sleeping, not blocked: must drop
    sched.AdvanceBy(10);
    sched.Wake(0);
  });
  sched.Run();
  CHECK(resumed_at == 100);
}

TEST_CASE("stale wake on a running lane drops") {
  Scheduler sched(2);
  int wakes_seen = 0;
  sched.Spawn(0, [&] {
    sched.AdvanceBy(5);
    // Lane 1's wake was posted at t=0 targeting a lane that never blocked;
    // it must have been discarded, so this Block needs the second wake.
    sched.Block(0);
    ++wakes_seen;
  });
  sched.Spawn(1, [&] {
    sched.Wake(0);  // dispatched while lane 0 sleeps: dropped
    sched.AdvanceBy(20);
    sched.Wake(0);  // lane 0 is blocked now: delivered
  });
  sched.Run();
  CHECK(wakes_seen == 1);
}

TEST_CASE("deadlock is detected and reported") {
  Scheduler sched(2);
  sched.Spawn(0, [&] { sched.Block(0); });
  sched.Spawn(1, [&] { sched.Block(1); });
  CHECK_THROWS_AS(sched.Run(), psbed::InvariantError);
}

TEST_CASE("posted closures run at their scheduled time") {
  Scheduler sched(1);
  std::vector<std::pair<std::string, Ticks>> log;
  sched.Spawn(0, [&] {
    sched.Post(40, 0, [&] { log.emplace_back("late", sched.Now()); });
    sched.Post(20, 0, [&] { log.emplace_back("early", sched.Now()); });
    sched.AdvanceBy(100);
    log.emplace_back("body", sched.Now());
  });
  sched.Run();
  CHECK(log == std::vector<std::pair<std::string, Ticks>>{
                   {"early", 20}, {"late", 40}, {"body", 100}});
}

TEST_CASE("closures can wake blocked lanes") {
  Scheduler sched(1);
  Ticks woke_at = -1;
  sched.Spawn(0, [&] {
    sched.Post(30, 0, [&] { sched.Wake(0); });
    sched.Block(0);
    woke_at = sched.Now();
  });
  sched.Run();
  CHECK(woke_at == 30);
}

TEST_CASE("closures chain and keep time ordered") {
  Scheduler sched(1);
  std::vector<Ticks> fired;
  std::function<void(int)> chain = [&](int depth) {
    fired.push_back(sched.Now());
    if (depth < 4) {
      sched.Post(sched.Now() + 10, 0, [&, depth] { chain(depth + 1); });
    }
  };
  sched.Spawn(0, [&] {
    sched.Post(5, 0, [&] { chain(0); });
    sched.AdvanceBy(200);
  });
  sched.Run();
  CHECK(fired == std::vector<Ticks>{5, 15, 25, 35, 45});
}

TEST_CASE("a body exception propagates out of run") {
  Scheduler sched(2);
  sched.Spawn(0, [&] {
    sched.AdvanceBy(10);
    throw std::runtime_error("lane 0 exploded");
  });
  sched.Spawn(1, [&] {
    for (int i = 0; i < 100; ++i) sched.AdvanceBy(1);
  });
  CHECK_THROWS_WITH_AS(sched.Run(), "lane 0 exploded", std::runtime_error);
}

TEST_CASE("current lane is visible inside bodies and closures") {
  Scheduler sched(2);
  std::vector<int> lanes;
  sched.Spawn(0, [&] {
    lanes.push_back(sched.CurrentLane());
    sched.AdvanceBy(1);
  });
  sched.Spawn(1, [&] {
    lanes.push_back(sched.CurrentLane());
    // Closures run on the driver, not on a lane.
    sched.Post(10, 1, [&] { lanes.push_back(sched.CurrentLane()); });
    sched.AdvanceBy(20);
  });
  sched.Run();
  CHECK(lanes == std::vector<int>{0, 1, -1});
}

TEST_CASE("negative sleep is rejected") {
  Scheduler sched(1);
  sched.Spawn(0, [&] { sched.AdvanceBy(-1); });
  CHECK_THROWS_AS(sched.Run(), psbed::InvariantError);
}

TEST_CASE("many lanes stress replay determinism") {
  auto run_once = [] {
    Scheduler sched(8);
    std::mutex mu;  // bodies run one at a time; mutex only for clarity
    std::vector<int> order;
    for (int lane = 0; lane < 8; ++lane) {
      sched.Spawn(lane, [&, lane] {
        for (int i = 0; i < 50; ++i) {
          {
            std::lock_guard<std::mutex> g(mu);
            order.push_back(lane);
          }
          sched.AdvanceBy((lane * 31 + i * 17) % 23);
        }
      });
    }
    sched.Run();
    return order;
  };
  auto a = run_once();
  auto b = run_once();
  CHECK(a == b);
  CHECK(a.size() == 8 * 50);
}
