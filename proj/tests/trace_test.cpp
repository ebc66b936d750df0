#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "rowtrack/trace.hpp"

using namespace rowtrack;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("rowtrack_trace_" + name)).string();
}

Geometry desk() {
  TrackerConfig t;
  t.variant = Variant::start_m;
  return Geometry(GeometryConfig{}, t);
}

}  // namespace

TEST(TraceFile, EmptyInputIsEmptyTrace) {
  EXPECT_EQ(parse_trace("").size(), 0u);
  const auto path = tmp_path("empty.txt");
  detail::write_file(path, "");
  EXPECT_EQ(read_trace(path).size(), 0u);
}

TEST(TraceFile, HandWrittenAccessFixture) {
  const auto t = parse_trace("0 0x0 R\n45 0x1f40 W\n# comment\n\n90 0xdeadbeef R\n");
  ASSERT_EQ(t.kind, TraceKind::access);
  ASSERT_EQ(t.accesses.size(), 3u);
  EXPECT_EQ(t.accesses[0], (MemoryAccess{0, 0, AccessKind::read}));
  EXPECT_EQ(t.accesses[1], (MemoryAccess{45, 0x1f40, AccessKind::write}));
  EXPECT_EQ(t.accesses[2], (MemoryAccess{90, 0xdeadbeef, AccessKind::read}));
}

TEST(TraceFile, HandWrittenActivationFixture) {
  const auto t = parse_trace("10 7 D\n10 6 V\n12 32760 M\n");
  ASSERT_EQ(t.kind, TraceKind::activation);
  ASSERT_EQ(t.activations.size(), 3u);
  EXPECT_EQ(t.activations[1], (ActivationEvent{10, 6, Cause::victim_refresh}));
  EXPECT_EQ(t.activations[2], (ActivationEvent{12, 32760, Cause::metadata}));
}

TEST(TraceFile, MalformedLineReportsNumber) {
  try {
    parse_trace("0 0x0 R\n5 zz R\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedTrace);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_trace("0 0x0 Q\n"), Error);
  EXPECT_THROW(parse_trace("0 0x0\n"), Error);
  EXPECT_THROW(parse_trace("0 0x0 R\n1 5 D\n"), Error);
}

TEST(TraceFile, RejectsTimeGoingBackwards) {
  try {
    parse_trace("10 0x0 R\n9 0x40 R\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonMonotonicTime);
  }
}

TEST(TraceFile, CanonicalRoundTripIsByteIdentical) {
  const std::string canon = "0 0x0 R\n45 0x1f40 W\n90 0xdeadbeef R\n";
  const auto path = tmp_path("canon.txt");
  detail::write_file(path, canon);
  const auto again = tmp_path("canon2.txt");
  write_trace(read_trace(path).accesses, again);
  EXPECT_EQ(detail::read_file(again), canon);
}

TEST(TraceFile, GzipRoundTrip) {
  const auto geo = desk();
  PatternSpec s;
  s.pattern = Pattern::uniform;
  s.row_pool = random_pool(geo, 32, 5);
  s.access_count = 2000;
  const auto acc = generate(s, geo);
  const auto path = tmp_path("gen.trace.gz");
  write_trace(acc, path);
  EXPECT_EQ(read_trace(path).accesses, acc);
  const auto events = to_activations(geo, acc);
  const auto apath = tmp_path("gen.act.gz");
  write_trace(events, apath);
  EXPECT_EQ(read_trace(apath).activations, events);
}

TEST(Generator, DeterministicPerSeed) {
  const auto geo = desk();
  PatternSpec s;
  s.pattern = Pattern::zipf;
  s.row_pool = random_pool(geo, 100, 9);
  s.access_count = 5000;
  s.seed = 42;
  s.write_fraction = 0.3;
  EXPECT_EQ(format_trace(generate(s, geo)), format_trace(generate(s, geo)));
  auto other = s;
  other.seed = 43;
  EXPECT_NE(format_trace(generate(s, geo)), format_trace(generate(other, geo)));
}

TEST(Generator, SingleSidedFillsOneWindow) {
  TrackerConfig t;
  Geometry geo(table1_geometry(), t);
  PatternSpec s;
  s.pattern = Pattern::single_sided;
  s.row_pool = {1234};
  s.duration_ns = 64'000'000;
  AccessGenerator gen(geo, s);
  std::uint64_t n = 0;
  while (auto a = gen.next()) {
    ASSERT_EQ(geo.map_address(a->addr).row_id, 1234u);
    ++n;
  }
  EXPECT_EQ(n, 1'422'222u);

  s.refresh_discount = true;
  AccessGenerator capped(geo, s);
  n = 0;
  while (capped.next()) ++n;
  EXPECT_EQ(n, 1'359'644u);
}

TEST(Generator, RefreshDiscountCapsEveryBankWindow) {
  GeometryConfig g;
  g.window_ns = 1'000'000;
  TrackerConfig t;
  Geometry geo(g, t);
  PatternSpec s;
  s.pattern = Pattern::double_sided;
  s.row_pool = {1000};
  s.duration_ns = 5'000'000;
  s.refresh_discount = true;
  const auto acc = generate(s, geo);
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::uint64_t> per;
  for (const auto& a : acc) ++per[{a.time_ns / g.window_ns, geo.map_address(a.addr).bank}];
  for (const auto& [k, n] : per) EXPECT_LE(n, geo.act_max_per_window(true));
  EXPECT_EQ(per.size(), 5u);
}

TEST(Generator, UniformOverOneRowEqualsSingleSided) {
  const auto geo = desk();
  PatternSpec u;
  u.pattern = Pattern::uniform;
  u.row_pool = {777};
  u.access_count = 3000;
  auto ss = u;
  ss.pattern = Pattern::single_sided;
  EXPECT_EQ(generate(u, geo), generate(ss, geo));
}

TEST(Generator, ZipfZeroIsUniform) {
  const auto geo = desk();
  PatternSpec s;
  s.pattern = Pattern::zipf;
  s.zipf_s = 0.0;
  s.row_pool = random_pool(geo, 20, 3);
  s.access_count = 200'000;
  std::map<std::uint64_t, std::uint64_t> freq;
  for (const auto& a : generate(s, geo)) ++freq[geo.map_address(a.addr).row_id];
  ASSERT_EQ(freq.size(), 20u);
  // Per-row binomial 3-sigma band and a chi-square bound with 19 dof.
  const double n = 200'000, p = 1.0 / 20;
  const double sigma = std::sqrt(n * p * (1 - p));
  double chi2 = 0;
  for (const auto& [row, c] : freq) {
    EXPECT_NEAR(static_cast<double>(c), n * p, 3 * sigma + 1);
    chi2 += std::pow(static_cast<double>(c) - n * p, 2) / (n * p);
  }
  EXPECT_LT(chi2, 43.8);  // p = 0.001 critical value
}

TEST(Generator, DoubleSidedAlternatesAroundVictim) {
  const auto geo = desk();
  PatternSpec s;
  s.pattern = Pattern::double_sided;
  s.row_pool = {500};
  s.access_count = 100;
  const auto acc = generate(s, geo);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    EXPECT_EQ(geo.map_address(acc[i].addr).row_id, i % 2 == 0 ? 499u : 501u);
    EXPECT_EQ(acc[i].time_ns, i * geo.config().trc_ns);
  }
}

TEST(Generator, ManySidedStaysInBank) {
  const auto geo = desk();
  PatternSpec s;
  s.pattern = Pattern::many_sided;
  s.aggressor_rows = 6;
  s.row_pool = {300};
  s.access_count = 60;
  std::set<std::uint64_t> rows;
  for (const auto& a : generate(s, geo)) rows.insert(geo.map_address(a.addr).row_id);
  EXPECT_EQ(rows, (std::set<std::uint64_t>{299, 301, 303, 305, 307, 309}));
  s.row_pool = {geo.layout().rows_per_bank - 2};
  EXPECT_THROW(generate(s, geo), Error);
}

TEST(Generator, DecoyRotationInterleavesBursts) {
  const auto geo = desk();
  PatternSpec s;
  s.pattern = Pattern::decoy_rotation;
  s.aggressor_rows = 2;
  s.decoy_count = 4;
  s.row_pool = {10, 20, 100, 101, 102, 103, 104, 105};
  s.access_count = 16;
  std::vector<std::uint64_t> rows;
  for (const auto& a : generate(s, geo)) rows.push_back(geo.map_address(a.addr).row_id);
  EXPECT_EQ(rows, (std::vector<std::uint64_t>{10, 20, 10, 20, 100, 101, 102, 103, 10, 20, 10, 20, 104, 105, 100, 101}));
}

TEST(Generator, ThrashPoolExceedsEightWayCapacity) {
  GeometryConfig g;
  g.row_count = 65536;
  TrackerConfig t;
  t.variant = Variant::start_m;
  Geometry geo(g, t);
  const auto pool = thrash_pool(geo, 2, 0, 1);
  std::set<std::uint32_t> sets;
  for (auto r : pool) {
    sets.insert(geo.map_row(r).set_index);
    EXPECT_LT(r, geo.row_count() - geo.layout().rows_per_bank);
  }
  EXPECT_EQ(pool.size(), sets.size() * 8 * 2 * geo.layout().entries_per_line);
  EXPECT_EQ(std::set<std::uint64_t>(pool.begin(), pool.end()).size(), pool.size());
}

TEST(Generator, Errors) {
  const auto geo = desk();
  PatternSpec s;
  s.pattern = Pattern::uniform;
  s.access_count = 10;
  try {
    generate(s, geo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyPool);
  }
  s.row_pool = {1};
  s.spacing_ns = 10;
  try {
    generate(s, geo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InfeasibleRate);
  }
  s.spacing_ns = 0;
  s.refresh_discount = true;
  s.duration_ns = 64'000'000;
  s.access_count = 2'000'000;
  EXPECT_THROW(generate(s, geo), Error);
}

TEST(Generator, PatternNamesParse) {
  for (auto p : kAllPatterns) EXPECT_EQ(parse_pattern(to_string(p)), p);
  EXPECT_EQ(parse_pattern("double-sided"), Pattern::double_sided);
  EXPECT_THROW(parse_pattern("quad"), Error);
}
