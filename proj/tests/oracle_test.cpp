#include <gtest/gtest.h>

#include <random>
#include <unordered_map>

#include "rowtrack/simulator.hpp"

using namespace rowtrack;

namespace {

constexpr std::uint64_t kWindow = 1'000'000;

std::vector<ActivationEvent> hammer(std::uint64_t row, int n, std::uint64_t start = 0, std::uint64_t gap = 45) {
  std::vector<ActivationEvent> out;
  for (int i = 0; i < n; ++i) out.push_back({start + i * gap, row, Cause::demand});
  return out;
}

MitigationRecord at(std::uint64_t idx, std::uint64_t row) {
  MitigationRecord m;
  m.event_index = idx;
  m.aggressor_row = row;
  return m;
}

// Counts like a tracker but forgets every tenth increment it sees.
std::vector<MitigationRecord> lossy_mitigations(const std::vector<ActivationEvent>& ev, std::uint32_t te) {
  std::unordered_map<std::uint64_t, std::uint32_t> c;
  std::vector<MitigationRecord> out;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (i % 10 == 9) continue;
    if (++c[ev[i].row_id] >= te) {
      c[ev[i].row_id] = 0;
      out.push_back(at(i, ev[i].row_id));
    }
  }
  return out;
}

}  // namespace

TEST(Theorem1, EmptyTraceIsClean) {
  EXPECT_TRUE(check_theorem1({}, {}, 16, kWindow).empty());
  EXPECT_TRUE(check_refresh_window({}, {}, 16, kWindow).empty());
}

TEST(Theorem1, ExactMitigationIsClean) {
  const auto ev = hammer(5, 16);
  EXPECT_TRUE(check_theorem1(ev, std::vector{at(7, 5), at(15, 5)}, 16, kWindow).empty());
}

TEST(Theorem1, MissingMitigationIsReported) {
  const auto ev = hammer(5, 8);
  const auto v = check_theorem1(ev, {}, 16, kWindow);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::missed);
  EXPECT_EQ(v[0].event_index, 7u);
}

TEST(Theorem1, EarlyAndWrongRowAreReported) {
  const auto ev = hammer(5, 8);
  auto v = check_theorem1(ev, std::vector{at(3, 5)}, 16, kWindow);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].kind, ViolationKind::early);
  EXPECT_TRUE(check_theorem1(ev, std::vector{at(3, 5)}, 16, kWindow, false).empty());
  v = check_theorem1(ev, std::vector{at(7, 6)}, 16, kWindow);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].kind, ViolationKind::wrong_row);
}

TEST(Theorem1, WindowBoundaryResetsCounts) {
  // 7 before the boundary, 7 after: never reaches 8 within one window
  auto ev = hammer(5, 7, kWindow - 7 * 45);
  const auto after = hammer(5, 7, kWindow);
  ev.insert(ev.end(), after.begin(), after.end());
  EXPECT_TRUE(check_theorem1(ev, {}, 16, kWindow).empty());
}

TEST(Theorem1, UnorderedInputThrows) {
  auto ev = hammer(5, 3);
  std::swap(ev[0], ev[2]);
  EXPECT_THROW(check_theorem1(ev, {}, 16, kWindow), Error);
  const auto ok = hammer(5, 8);
  EXPECT_THROW(check_theorem1(ok, std::vector{at(9, 5)}, 16, kWindow), Error);
}

TEST(Theorem1, LossyCounterIsCaught) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::uint64_t> row(0, 30);
  std::vector<ActivationEvent> ev;
  for (int i = 0; i < 20000; ++i) ev.push_back({std::uint64_t(i) * 45, row(rng), Cause::demand});
  const auto v = check_theorem1(ev, lossy_mitigations(ev, 8), 16, kWindow);
  EXPECT_GT(v.size(), 100u);
}

TEST(RefreshWindow, StraddlingBoundaryIsCaught) {
  // Theorem-1 windows are aligned; the refresh-window check slides. Two
  // aligned windows each see 15 activations, yet 16 fit in one period.
  const std::uint32_t t_rh = 16;
  auto ev = hammer(5, 15, kWindow - 15 * 45);
  const auto after = hammer(5, 15, kWindow);
  ev.insert(ev.end(), after.begin(), after.end());
  const auto v = check_refresh_window(ev, {}, t_rh, kWindow);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::refresh_window);
  EXPECT_EQ(v[0].count, 16u);
}

TEST(RefreshWindow, MitigationSplitsHistory) {
  const auto ev = hammer(5, 30);
  EXPECT_TRUE(check_refresh_window(ev, std::vector{at(14, 5)}, 16, kWindow).empty());
  EXPECT_EQ(check_refresh_window(ev, std::vector{at(20, 5)}, 16, kWindow).size(), 1u);
}

TEST(RefreshWindow, SpreadOutActivationsAreFine) {
  const auto ev = hammer(5, 100, 0, kWindow / 10);
  EXPECT_TRUE(check_refresh_window(ev, {}, 16, kWindow).empty());
}

TEST(Exactness, DetectsBothDirections) {
  TruthState t(8, kWindow);
  t.apply({0, 3, Cause::demand});
  t.apply({1, 3, Cause::demand});
  t.apply({2, 9, Cause::demand});
  EXPECT_TRUE(check_exactness({{3, 2}, {9, 1}}, t).empty());
  const auto mm = check_exactness({{3, 1}, {4, 1}}, t);
  ASSERT_EQ(mm.size(), 3u);
  EXPECT_EQ(mm[0].row, 3u);
  EXPECT_EQ(mm[1].row, 4u);
  EXPECT_EQ(mm[1].truth, 0u);
  EXPECT_EQ(mm[2].row, 9u);
  EXPECT_EQ(mm[2].tracker, 0u);
  t.advance(kWindow);
  EXPECT_TRUE(t.snapshot().empty());
}

TEST(Fuzz, StartDRunsClean) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    GeometryConfig g;
    g.window_ns = 100'000 + rng() % 100'000;
    TrackerConfig t;
    t.variant = Variant::start_d;
    t.t_rh = std::array{16u, 64u, 256u}[rng() % 3];
    t.blast_radius = 1 + rng() % 4;
    const Geometry geo(g, t);
    PatternSpec s;
    s.pattern = kAllPatterns[rng() % std::size(kAllPatterns)];
    s.row_pool = random_pool(geo, 1 + rng() % 300, rng());
    if (s.pattern == Pattern::mtt_thrash) s.row_pool = thrash_pool(geo, 2, 4, rng());
    s.access_count = 5000;
    s.seed = rng();
    SimOptions o;
    o.mode = FrontendMode::direct;
    o.oracle = trial % 2 ? OracleMode::inline_ : OracleMode::post;
    o.exactness_interval = 1000;
    Simulator sim(g, t, o);
    std::vector<MemoryAccess> acc;
    try {
      acc = generate(s, geo);
    } catch (const Error&) {
      continue;  // e.g. many-sided near a bank edge
    }
    sim.run(acc);
    const auto r = sim.finish();
    ASSERT_TRUE(r.oracle.clean()) << "trial " << trial << " pattern " << to_string(s.pattern);
  }
}
