#include <gtest/gtest.h>

#include <map>

#include "rowtrack/simulator.hpp"

using namespace rowtrack;

namespace {

Geometry desk(std::uint32_t t_rh = 256, std::uint32_t blast = 1, Variant v = Variant::start_d) {
  TrackerConfig t;
  t.variant = v;
  t.t_rh = t_rh;
  t.blast_radius = blast;
  return Geometry(GeometryConfig{}, t);
}

}  // namespace

TEST(Victims, NearestFirstBothSides) {
  const auto geo = desk();
  EXPECT_EQ(victim_rows(geo, 100, 1), (std::vector<std::uint64_t>{99, 101}));
  EXPECT_EQ(victim_rows(geo, 100, 2), (std::vector<std::uint64_t>{99, 101, 98, 102}));
}

TEST(Victims, ClippedAtBankEdges) {
  const auto geo = desk();
  const auto per_bank = geo.layout().rows_per_bank;
  EXPECT_EQ(victim_rows(geo, 0, 2), (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(victim_rows(geo, per_bank, 1), (std::vector<std::uint64_t>{per_bank + 1}));
  EXPECT_EQ(victim_rows(geo, per_bank - 1, 2), (std::vector<std::uint64_t>{per_bank - 2, per_bank - 3}));
  EXPECT_EQ(victim_rows(geo, 500, 4).size(), 8u);
  EXPECT_THROW(victim_rows(geo, 500, 0), Error);
  EXPECT_THROW(victim_rows(geo, 500, 5), Error);
  EXPECT_THROW(victim_rows(geo, geo.row_count(), 1), Error);
}

TEST(Victims, ExecuteFillsRecord) {
  const auto geo = desk();
  MitigationRecord rec;
  const auto ev = execute_mitigation(geo, 42, 777, 2, &rec);
  ASSERT_EQ(ev.size(), 4u);
  for (const auto& e : ev) {
    EXPECT_EQ(e.time_ns, 777u);
    EXPECT_EQ(e.cause, Cause::victim_refresh);
  }
  EXPECT_EQ(rec.aggressor_row, 42u);
  EXPECT_EQ(rec.blast_radius, 2u);
  EXPECT_EQ(rec.victim_rows, (std::vector<std::uint64_t>{41, 43, 40, 44}));
}

TEST(Cascade, EmptyQueueDoesNothing) {
  int calls = 0;
  const auto r = drain_cascade({}, [&](const ActivationEvent&) {
    ++calls;
    return CascadeStep{};
  });
  EXPECT_EQ(calls, 0);
  EXPECT_EQ(r.processed, 0u);
  EXPECT_EQ(r.max_depth, 0u);
}

TEST(Cascade, FifoOrderAndDepth) {
  std::vector<std::uint64_t> seen;
  const auto r = drain_cascade({{0, 1, Cause::demand}}, [&](const ActivationEvent& e) {
    seen.push_back(e.row_id);
    CascadeStep s;
    if (e.row_id == 1) {
      s.mitigated = true;
      s.follow_ups = {{0, 10, Cause::victim_refresh}, {0, 11, Cause::victim_refresh}};
    } else if (e.row_id == 10) {
      s.mitigated = true;
      s.follow_ups = {{0, 20, Cause::victim_refresh}};
    }
    return s;
  });
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{1, 10, 11, 20}));
  EXPECT_EQ(r.mitigations, 2u);
  EXPECT_EQ(r.max_depth, 2u);
}

TEST(Cascade, RunawayHitsCap) {
  try {
    drain_cascade({{0, 1, Cause::demand}},
                  [](const ActivationEvent& e) {
                    return CascadeStep{true, {{0, e.row_id + 1, Cause::victim_refresh}}};
                  },
                  50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CascadeLimit);
  }
}

TEST(Cascade, VictimRefreshCanTriggerSecondMitigation) {
  // Row 101 sits one activation below threshold; mitigating 100 refreshes it.
  const auto geo = desk(16);
  SimOptions o;
  o.mode = FrontendMode::direct;
  o.oracle = OracleMode::inline_;
  Simulator sim(geo.config(), geo.tracker(), o);
  std::uint64_t t = 0;
  for (int i = 0; i < 7; ++i) sim.activate({t += 45, 101, Cause::demand});
  for (int i = 0; i < 8; ++i) sim.activate({t += 45, 100, Cause::demand});
  const auto r = sim.finish();
  ASSERT_EQ(sim.mitigations().size(), 2u);
  EXPECT_EQ(sim.mitigations()[0].aggressor_row, 100u);
  EXPECT_EQ(sim.mitigations()[1].aggressor_row, 101u);
  EXPECT_EQ(r.max_cascade_depth, 2u);
  EXPECT_EQ(r.victim_refreshes, 4u);
  EXPECT_TRUE(r.oracle.clean());
}

TEST(Cascade, HalfDoubleIsCaughtAtDistanceTwo) {
  // Hammer only row 100; refreshes of 99/101 accumulate into their own
  // mitigations, which refresh 98/102 in turn.
  const auto geo = desk(16);
  SimOptions o;
  o.mode = FrontendMode::direct;
  Simulator sim(geo.config(), geo.tracker(), o);
  std::uint64_t t = 0;
  for (int i = 0; i < 8 * 8 * 3; ++i) sim.activate({t += 45, 100, Cause::demand});
  const auto r = sim.finish();
  std::map<std::uint64_t, int> by_row;
  for (const auto& m : sim.mitigations()) ++by_row[m.aggressor_row];
  EXPECT_GE(by_row[100], 24);
  EXPECT_GE(by_row[99], 2);
  EXPECT_GE(by_row[101], 2);
  EXPECT_EQ(r.victim_refreshes, 2 * sim.mitigations().size());
  EXPECT_TRUE(r.oracle.clean());
  // no row, distance-two victims included, ever reaches t_rh between refreshes
  EXPECT_EQ(r.oracle.refresh_window_violations, 0u);
}
