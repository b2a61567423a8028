#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "psbed/common/error.hpp"
#include "psbed/common/hash_rng.hpp"
#include "psbed/common/interval.hpp"

using psbed::HashBernoulli;
using psbed::HashMix;
using psbed::Interval;
using psbed::IntervalSet;
using psbed::SplitMix64;
using psbed::ToUnitDouble;
using psbed::ToUnitDoubleOpenLow;

TEST_CASE("interval basics") {
  Interval iv{3, 7};
  CHECK(iv.size() == 4);
  CHECK_FALSE(iv.empty());
  CHECK(Interval{5, 5}.empty());
  CHECK(Interval{6, 5}.empty());

  CHECK(iv.Contains(3));
  CHECK(iv.Contains(6));
  CHECK_FALSE(iv.Contains(7));
  CHECK_FALSE(iv.Contains(2));

  CHECK(iv.Contains(Interval{3, 7}));
  CHECK(iv.Contains(Interval{4, 6}));
  CHECK(iv.Contains(Interval{5, 5}));  // empty fits anywhere
  CHECK_FALSE(iv.Contains(Interval{2, 4}));
  CHECK_FALSE(iv.Contains(Interval{6, 8}));

  CHECK(iv.Overlaps(Interval{6, 9}));
  CHECK(iv.Overlaps(Interval{0, 4}));
  CHECK_FALSE(iv.Overlaps(Interval{7, 9}));  // half-open: touching is disjoint
  CHECK_FALSE(iv.Overlaps(Interval{0, 3}));
  CHECK_FALSE(iv.Overlaps(Interval{5, 5}));

  CHECK(iv == Interval{3, 7});
  CHECK_FALSE(iv == Interval{3, 8});
}

TEST_CASE("interval set add rejects overlap and merges adjacency") {
  IntervalSet s;
  CHECK(s.Add(Interval{10, 20}));
  CHECK(s.Add(Interval{30, 40}));
  CHECK_FALSE(s.Add(Interval{15, 25}));  // overlaps [10,20)
  CHECK_FALSE(s.Add(Interval{25, 35}));  // overlaps [30,40)
  CHECK_FALSE(s.Add(Interval{0, 100}));  // spans everything
  CHECK(s.TotalSize() == 20);            // failed adds changed nothing

  CHECK(s.Add(Interval{20, 30}));  // bridges the gap
  CHECK(s.parts().size() == 1);
  CHECK(s.parts()[0] == Interval{10, 40});
  CHECK(s.CoversExactly(Interval{10, 40}));

  CHECK(s.Add(Interval{5, 5}));  // empty add is a no-op success
  CHECK(s.TotalSize() == 30);
}

TEST_CASE("interval set add merges on both sides") {
  IntervalSet s;
  CHECK(s.Add(Interval{0, 5}));
  CHECK(s.Add(Interval{5, 9}));  // right-extends
  CHECK(s.parts().size() == 1);
  CHECK(s.parts()[0] == Interval{0, 9});

  IntervalSet t;
  CHECK(t.Add(Interval{5, 9}));
  CHECK(t.Add(Interval{0, 5}));  // left-extends
  CHECK(t.parts().size() == 1);
  CHECK(t.parts()[0] == Interval{0, 9});
}

TEST_CASE("interval set union merges overlaps") {
  IntervalSet s;
  s.Union(Interval{10, 20});
  s.Union(Interval{30, 40});
  s.Union(Interval{15, 35});  // swallows the gap and both neighbours
  CHECK(s.parts().size() == 1);
  CHECK(s.parts()[0] == Interval{10, 40});
  s.Union(Interval{40, 45});  // adjacent
  CHECK(s.parts().size() == 1);
  CHECK(s.parts()[0] == Interval{10, 45});
  s.Union(Interval{50, 50});  // empty no-op
  CHECK(s.TotalSize() == 35);
}

TEST_CASE("interval set membership and coverage") {
  IntervalSet s;
  s.Union(Interval{2, 4});
  s.Union(Interval{8, 12});
  CHECK(s.Contains(2));
  CHECK(s.Contains(3));
  CHECK_FALSE(s.Contains(4));
  CHECK_FALSE(s.Contains(7));
  CHECK(s.Contains(11));
  CHECK_FALSE(s.Contains(12));

  CHECK(s.CoversAll(Interval{8, 12}));
  CHECK(s.CoversAll(Interval{9, 11}));
  CHECK_FALSE(s.CoversAll(Interval{2, 9}));
  CHECK(s.CoversAll(Interval{5, 5}));  // empty is always covered
  CHECK_FALSE(s.CoversExactly(Interval{2, 12}));

  IntervalSet empty;
  CHECK(empty.CoversExactly(Interval{3, 3}));
  CHECK_FALSE(empty.CoversAll(Interval{0, 1}));
}

TEST_CASE("interval set next uncovered") {
  IntervalSet s;
  CHECK(s.NextUncovered(5, 100) == 5);  // empty set: from itself
  s.Union(Interval{0, 10});
  s.Union(Interval{20, 30});
  CHECK(s.NextUncovered(0, 100) == 10);
  CHECK(s.NextUncovered(9, 100) == 10);
  CHECK(s.NextUncovered(10, 100) == 10);  // gap starts here
  CHECK(s.NextUncovered(25, 100) == 30);
  CHECK(s.NextUncovered(25, 28) == 28);  // limit clamps
  CHECK(s.NextUncovered(40, 100) == 40);
  s.Union(Interval{10, 20});
  CHECK(s.NextUncovered(0, 30) == 30);  // fully covered up to limit
}

TEST_CASE("interval set matches a bitmap model under random adds") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 50; ++round) {
    const uint32_t n = 64;
    IntervalSet s;
    std::vector<bool> model(n, false);
    for (int step = 0; step < 40; ++step) {
      uint32_t a = static_cast<uint32_t>(rng() % n);
      uint32_t b = static_cast<uint32_t>(rng() % (n + 1));
      if (a > b) std::swap(a, b);
      const Interval iv{a, b};
      bool overlap = false;
      for (uint32_t i = a; i < b; ++i) overlap = overlap || model[i];
      CHECK(s.Add(iv) == !overlap);
      if (!overlap) {
        for (uint32_t i = a; i < b; ++i) model[i] = true;
      }
      // Membership, coverage and scan agree with the bitmap everywhere.
      uint64_t total = 0;
      for (uint32_t i = 0; i < n; ++i) {
        CHECK(s.Contains(i) == model[i]);
        if (model[i]) ++total;
      }
      CHECK(s.TotalSize() == total);
      for (uint32_t from = 0; from < n; from += 13) {
        uint32_t expect = from;
        while (expect < n && model[expect]) ++expect;
        CHECK(s.NextUncovered(from, n) == expect);
      }
      // Canonical form: sorted, disjoint, non-adjacent.
      const auto& parts = s.parts();
      for (size_t i = 1; i < parts.size(); ++i) {
        CHECK(parts[i - 1].end < parts[i].begin);
      }
    }
  }
}

TEST_CASE("splitmix64 matches the published reference stream") {
  // Stream seeded with 0: output k equals SplitMix64(k * gamma).
  constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  CHECK(SplitMix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(SplitMix64(kGamma) == 0x6e789e6aa1b965f4ULL);
  CHECK(SplitMix64(2 * kGamma) == 0x06c45d188009454fULL);
}

TEST_CASE("hash mix is deterministic and order-sensitive") {
  CHECK(HashMix(1, 2) == HashMix(1, 2));
  CHECK(HashMix(1, 2) != HashMix(2, 1));
  CHECK(HashMix(1, 2, 3) != HashMix(1, 3, 2));
  CHECK(HashMix(1, 2, 3, 4) != HashMix(4, 3, 2, 1));
  // Nearby tuples never collide in a modest scan.
  std::vector<uint64_t> seen;
  for (uint64_t a = 0; a < 50; ++a) {
    for (uint64_t b = 0; b < 50; ++b) seen.push_back(HashMix(a, b));
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("unit double ranges") {
  CHECK(ToUnitDouble(0) == 0.0);
  CHECK(ToUnitDouble(~0ULL) < 1.0);
  CHECK(ToUnitDoubleOpenLow(0) == 1.0);
  CHECK(ToUnitDoubleOpenLow(~0ULL) > 0.0);
  for (uint64_t i = 0; i < 1000; ++i) {
    const double u = ToUnitDouble(SplitMix64(i));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = ToUnitDoubleOpenLow(SplitMix64(i));
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("unit double is uniform on average") {
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += ToUnitDouble(SplitMix64(i));
  const double mean = sum / n;
  CHECK(mean > 0.49);
  CHECK(mean < 0.51);
}

TEST_CASE("hash bernoulli honours degenerate probabilities") {
  CHECK_FALSE(HashBernoulli(0, 0.0));
  CHECK_FALSE(HashBernoulli(~0ULL, -1.0));
  CHECK(HashBernoulli(0, 1.0));
  CHECK(HashBernoulli(~0ULL, 2.0));
  // h = 0 maps to u = 0 which is below any positive p.
  CHECK(HashBernoulli(0, 1e-9));
}

TEST_CASE("check macros throw invariant errors with context") {
  CHECK_NOTHROW(PSBED_CHECK(1 + 1 == 2));
  CHECK_THROWS_AS(PSBED_CHECK(1 == 2), psbed::InvariantError);
  try {
    PSBED_CHECK_MSG(false, "the sky fell");
    FAIL("unreachable");
  } catch (const psbed::InvariantError& e) {
    const std::string what = e.what();
    CHECK(what.find("the sky fell") != std::string::npos);
    CHECK(what.find("false") != std::string::npos);
  }
}

TEST_CASE("error types map to distinct categories") {
  psbed::ConfigError cfg("bad key");
  psbed::InvariantError inv("broken");
  CHECK(std::string(cfg.what()) == "bad key");
  CHECK(std::string(inv.what()) == "broken");
}
