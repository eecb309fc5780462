#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "uwt/sim/engine.hpp"
#include "uwt/sim/rng.hpp"

using namespace uwt;

TEST(Engine, EmptyRunAdvancesClock) {
  Engine e;
  const auto s = e.run_until(SimTime{100});
  EXPECT_EQ(e.now().seconds, 100);
  EXPECT_EQ(s.processed, 0u);
}

TEST(Engine, FiresAtScheduledTime) {
  Engine e;
  double seen = -1;
  e.schedule(SimTime{3}, EventKind::Timer, [&] {
    e.schedule(SimTime{5}, EventKind::Timer, [&] { seen = e.now().seconds; });
  });
  e.run_until(SimTime{10});
  EXPECT_EQ(seen, 5.0);
}

TEST(Engine, EqualTimesRunFifo) {
  Engine e;
  std::string order;
  e.schedule(SimTime{5}, EventKind::Timer, [&] { order += 'A'; });
  e.schedule(SimTime{5}, EventKind::Timer, [&] { order += 'B'; });
  e.schedule(SimTime{4}, EventKind::Timer, [&] { order += 'C'; });
  e.run_until(SimTime{6});
  EXPECT_EQ(order, "CAB");
}

TEST(Engine, SchedulingInThePastThrows) {
  Engine e;
  bool threw = false;
  e.schedule(SimTime{3}, EventKind::Timer, [&] {
    try {
      e.schedule(SimTime{2}, EventKind::Timer, [] {});
    } catch (const SchedulingError&) {
      threw = true;
    }
  });
  e.run_until(SimTime{4});
  EXPECT_TRUE(threw);
}

TEST(Engine, BoundaryInclusive) {
  Engine e;
  int n = 0;
  for (double t : {1.0, 5.0, 10.0, 10.5}) e.schedule(SimTime{t}, EventKind::Timer, [&] { ++n; });
  const auto s = e.run_until(SimTime{10});
  EXPECT_EQ(n, 3);
  EXPECT_EQ(s.processed, 3u);
  EXPECT_EQ(e.pending(), 1u);
}

TEST(Engine, CancelledEventsDoNotFire) {
  Engine e;
  int n = 0;
  auto h = e.schedule(SimTime{2}, EventKind::Timer, [&] { ++n; });
  EXPECT_TRUE(e.cancel(h));
  EXPECT_FALSE(e.cancel(h));
  e.run_until(SimTime{3});
  EXPECT_EQ(n, 0);
}

namespace {

std::string traced_run(std::uint64_t seed) {
  Engine e(RunConfig{seed, SimTime{50}});
  e.enable_trace(true);
  RngStream rng = e.rng_stream("traffic");
  std::function<void()> tick = [&] {
    if (e.now().seconds < 40) e.schedule_in(rng.uniform(0.1, 3.0), EventKind::TrafficTick, tick);
  };
  e.schedule(SimTime{0}, EventKind::TrafficTick, tick);
  e.run_until(SimTime{50});
  return e.serialize_trace();
}

}  // namespace

TEST(Engine, IdenticalConfigGivesIdenticalTrace) {
  EXPECT_EQ(traced_run(11), traced_run(11));
  EXPECT_NE(traced_run(11), traced_run(12));
}

TEST(Rng, GoldenMobilityDraws) {
  RngStream r(7, "mobility");
  EXPECT_EQ(r.next_u64(), 0x41050506285c0379ULL);
  EXPECT_EQ(r.next_u64(), 0xf90281e6cf45e96fULL);
  EXPECT_EQ(r.next_u64(), 0x2905bf4536d7c27bULL);
  EXPECT_EQ(r.next_u64(), 0x8fa2ad67ac7a495eULL);
}

TEST(Rng, SameLabelSameSequence) {
  Engine a(RunConfig{7}), b(RunConfig{7});
  RngStream x = a.rng_stream("mobility"), y = b.rng_stream("mobility");
  for (int i = 0; i < 100; ++i) ASSERT_EQ(x.next_u64(), y.next_u64());
}

TEST(Rng, DistinctLabelsDiffer) {
  RngStream x(7, "mobility"), y(7, "channel");
  int same = 0;
  for (int i = 0; i < 100; ++i) same += x.next_u64() == y.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  RngStream r(3, "test");
  std::vector<int> hits(10, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto v = r.below(10);
    ASSERT_LT(v, 10u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 850);
}

TEST(Rng, HashUniformIsAddressable) {
  EXPECT_EQ(hash_uniform(99, 5), hash_uniform(99, 5));
  EXPECT_NE(hash_uniform(99, 5), hash_uniform(99, 6));
  for (std::uint64_t c = 0; c < 1000; ++c) {
    const double u = hash_uniform(12345, c);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
