#include <gtest/gtest.h>

#include <algorithm>

#include "rowtrack/simulator.hpp"

using namespace rowtrack;

namespace {

TrackerConfig tracker(Variant v, std::uint32_t t_rh = 256) {
  TrackerConfig t;
  t.variant = v;
  t.t_rh = t_rh;
  return t;
}

RunReport run_pattern(Variant v, Pattern p, std::uint64_t n = 20000, SimOptions o = {}) {
  GeometryConfig g;
  const auto t = tracker(v);
  const Geometry geo(g, t);
  PatternSpec s;
  s.pattern = p;
  s.row_pool = random_pool(geo, 500, 13);
  s.access_count = n;
  s.seed = 99;
  s.write_fraction = 0.2;
  o.pattern_label = std::string(to_string(p));
  o.seed = 99;
  Simulator sim(g, t, o);
  sim.run(generate(s, geo));
  return sim.finish();
}

std::size_t count_fields(const std::string& line) { return std::count(line.begin(), line.end(), ',') + 1; }

}  // namespace

TEST(Capacity, StaticVariantHoldsHalfTheCache) {
  const auto r = run_pattern(Variant::start_s, Pattern::uniform, 2000);
  EXPECT_DOUBLE_EQ(r.capacity_mean, 0.5);
  EXPECT_DOUBLE_EQ(r.capacity_mean_per_event, 0.5);
  EXPECT_DOUBLE_EQ(r.capacity_peak, 0.5);
}

TEST(Capacity, OneRowPerSetIsOneWayEach) {
  GeometryConfig g;
  const auto t = tracker(Variant::start_d);
  SimOptions o;
  o.mode = FrontendMode::direct;
  Simulator sim(g, t, o);
  for (std::uint64_t s = 0; s < 64; ++s) sim.activate({s * 45, s * 512, Cause::demand});
  const auto r = sim.finish();
  EXPECT_DOUBLE_EQ(r.capacity_peak, 1.0 / 16.0);
  EXPECT_EQ(r.escalations, 64u);
  ASSERT_EQ(r.windows.size(), 1u);
  EXPECT_EQ(r.windows[0].sac_histogram[1], 64u);
  EXPECT_EQ(r.windows[0].unique_rows_demand, 64u);
  // capacity ramps from 1/1024 to 64/1024 in equal steps
  EXPECT_NEAR(r.capacity_mean_per_event, (64.0 * 65.0 / 2.0) / 64.0 / 1024.0, 1e-12);
}

TEST(Capacity, TimeWeightedMeanUsesDurations) {
  GeometryConfig g;
  const auto t = tracker(Variant::start_d);
  SimOptions o;
  o.mode = FrontendMode::direct;
  Simulator sim(g, t, o);
  sim.activate({0, 0, Cause::demand});        // one way leased from t=0
  sim.activate({1000, 512, Cause::demand});   // a second from t=1000
  sim.activate({4000, 0, Cause::demand});
  const auto r = sim.finish();
  EXPECT_NEAR(r.capacity_mean, (1.0 * 1000 + 2.0 * 3000) / 4000 / 1024, 1e-12);
}

TEST(Report, JsonRoundTrip) {
  const auto r = run_pattern(Variant::start_m, Pattern::zipf);
  const auto text = to_json_string(r);
  EXPECT_EQ(report_from_json(text), r);
  const auto j = nlohmann::json::parse(text);
  for (const char* key : {"config", "activations", "mitigation", "llc", "mtt", "capacity", "windows", "oracle"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["config"]["variant"], "start-m");
  EXPECT_EQ(j["config"]["pattern"], "zipf");
}

TEST(Report, CsvRowMatchesHeader) {
  const auto r = run_pattern(Variant::start_d, Pattern::uniform, 3000);
  const auto header = csv_header();
  const auto row = csv_row(r);
  EXPECT_EQ(count_fields(header), csv_columns().size());
  EXPECT_EQ(count_fields(row), csv_columns().size());
  EXPECT_EQ(header.rfind("variant,t_rh,", 0), 0u);
  EXPECT_EQ(row.rfind("start-d,256,", 0), 0u);
  EXPECT_NE(csv_row(r, "InfeasibleRate").find(",InfeasibleRate\n"), std::string::npos);
}

TEST(Report, IdenticalInputsGiveIdenticalBytes) {
  const auto a = run_pattern(Variant::start_m, Pattern::decoy_rotation);
  const auto b = run_pattern(Variant::start_m, Pattern::decoy_rotation);
  EXPECT_EQ(to_json_string(a), to_json_string(b));
  EXPECT_EQ(csv_row(a), csv_row(b));
}

TEST(Report, ActivationBreakdownAddsUp) {
  const auto r = run_pattern(Variant::start_m, Pattern::zipf);
  EXPECT_EQ(r.activations, r.demand_activations + r.victim_refresh_activations + r.metadata_activations);
  EXPECT_EQ(r.victim_refresh_activations, r.victim_refreshes);
  EXPECT_EQ(r.llc_hits + r.llc_misses, r.accesses);
  EXPECT_TRUE(r.oracle.clean());
}

TEST(MissDelta, IdealHasNoOverhead) {
  GeometryConfig g;
  const auto t = tracker(Variant::ideal);
  const Geometry geo(g, t);
  PatternSpec s;
  s.pattern = Pattern::zipf;
  s.row_pool = random_pool(geo, 2000, 4);
  s.access_count = 20000;
  const auto d = miss_delta(g, t, generate(s, geo));
  EXPECT_EQ(d.baseline_misses, d.tracked_misses);
  EXPECT_DOUBLE_EQ(d.pct, 0.0);
  const auto r = run_pattern(Variant::ideal, Pattern::zipf);
  EXPECT_DOUBLE_EQ(r.miss_delta_pct(), 0.0);
}

TEST(MissDelta, StaticVariantCostsMisses) {
  GeometryConfig g;
  const auto t = tracker(Variant::start_s);
  // 12 lines per set: fits in 16 ways, thrashes in the 8 left over.
  std::vector<MemoryAccess> acc;
  for (int pass = 0; pass < 10; ++pass) {
    for (std::uint64_t l = 0; l < 12u * g.llc_sets; ++l) acc.push_back({acc.size() * 45, l * g.line_bytes, AccessKind::read});
  }
  const auto d = miss_delta(g, t, acc);
  EXPECT_GT(d.tracked_misses, d.baseline_misses);
  EXPECT_GT(d.pct, 0.0);
}

TEST(Logs, JsonLinesAndCanonicalForm) {
  std::vector<MitigationRecord> log(2);
  log[0].time_ns = 10;
  log[0].aggressor_row = 7;
  log[1].time_ns = 20;
  log[1].aggressor_row = 40000;
  EXPECT_EQ(mitigation_log_jsonl(log, Variant::start_d),
            "{\"time_ns\":10,\"row_id\":7,\"variant\":\"start-d\"}\n"
            "{\"time_ns\":20,\"row_id\":40000,\"variant\":\"start-d\"}\n");
  EXPECT_EQ(canonical_log(log), "10 7\n20 40000\n");
  EXPECT_EQ(canonical_log(log, 30000), "10 7\n");
}
