#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "rowtrack/config.hpp"
#include "rowtrack/mitigation.hpp"

namespace rowtrack {

struct ConfigEcho {
  std::string variant;
  std::uint32_t t_rh = 0;
  std::uint32_t effective_threshold = 0;
  std::uint32_t counter_bits = 0;
  std::uint32_t blast_radius = 0;
  std::uint64_t row_count = 0;
  std::uint64_t row_size_bytes = 0;
  std::uint32_t bank_count = 0;
  std::uint32_t line_bytes = 0;
  std::uint32_t llc_sets = 0;
  std::uint32_t llc_ways = 0;
  std::uint64_t trc_ns = 0;
  std::uint64_t window_ns = 0;
  std::string page_policy;
  std::string mode;
  std::string replacement;
  std::string pattern;
  std::uint64_t seed = 0;

  friend bool operator==(const ConfigEcho&, const ConfigEcho&) = default;
};

struct WindowStats {
  std::uint64_t index = 0;
  std::uint64_t unique_rows_demand = 0;
  std::uint64_t unique_rows_all = 0;
  std::uint64_t mitigations = 0;
  double peak_capacity = 0.0;
  std::array<std::uint64_t, 4> sac_histogram{};

  friend bool operator==(const WindowStats&, const WindowStats&) = default;
};

struct OracleSummary {
  std::string mode = "off";
  std::uint64_t theorem1_violations = 0;
  std::uint64_t refresh_window_violations = 0;
  std::uint64_t exactness_mismatches = 0;

  bool clean() const noexcept {
    return theorem1_violations == 0 && refresh_window_violations == 0 && exactness_mismatches == 0;
  }
  friend bool operator==(const OracleSummary&, const OracleSummary&) = default;
};

/// Everything a run measures. Field order here is the emitted order.
struct RunReport {
  ConfigEcho config;

  std::uint64_t accesses = 0;
  std::uint64_t activations = 0;
  std::uint64_t demand_activations = 0;
  std::uint64_t victim_refresh_activations = 0;
  std::uint64_t metadata_activations = 0;

  std::uint64_t mitigations = 0;
  std::uint64_t victim_refreshes = 0;
  std::uint32_t max_cascade_depth = 0;

  std::uint64_t llc_hits = 0;
  std::uint64_t llc_misses = 0;
  std::uint64_t baseline_llc_hits = 0;
  std::uint64_t baseline_llc_misses = 0;
  std::uint64_t forced_evictions = 0;
  std::uint64_t forced_writebacks = 0;
  std::uint64_t writebacks = 0;

  std::uint64_t mtt_reads = 0;
  std::uint64_t mtt_writes = 0;
  std::uint64_t mtt_resets = 0;
  std::uint64_t mtt_reset_line_writes = 0;
  std::uint64_t escalations = 0;

  double capacity_mean = 0.0;  // time-weighted
  double capacity_mean_per_event = 0.0;
  double capacity_peak = 0.0;
  std::uint64_t sim_time_ns = 0;

  std::vector<WindowStats> windows;
  OracleSummary oracle;

  double miss_delta_pct() const {
    if (baseline_llc_misses == 0) return llc_misses == 0 ? 0.0 : 100.0;
    return 100.0 * (static_cast<double>(llc_misses) - static_cast<double>(baseline_llc_misses)) /
           static_cast<double>(baseline_llc_misses);
  }

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

inline void to_json(nlohmann::ordered_json& j, const ConfigEcho& c) {
  j = nlohmann::ordered_json{{"variant", c.variant},
                             {"t_rh", c.t_rh},
                             {"effective_threshold", c.effective_threshold},
                             {"counter_bits", c.counter_bits},
                             {"blast_radius", c.blast_radius},
                             {"row_count", c.row_count},
                             {"row_size_bytes", c.row_size_bytes},
                             {"bank_count", c.bank_count},
                             {"line_bytes", c.line_bytes},
                             {"llc_sets", c.llc_sets},
                             {"llc_ways", c.llc_ways},
                             {"trc_ns", c.trc_ns},
                             {"window_ns", c.window_ns},
                             {"page_policy", c.page_policy},
                             {"mode", c.mode},
                             {"replacement", c.replacement},
                             {"pattern", c.pattern},
                             {"seed", c.seed}};
}

inline void from_json(const nlohmann::ordered_json& j, ConfigEcho& c) {
  j.at("variant").get_to(c.variant);
  j.at("t_rh").get_to(c.t_rh);
  j.at("effective_threshold").get_to(c.effective_threshold);
  j.at("counter_bits").get_to(c.counter_bits);
  j.at("blast_radius").get_to(c.blast_radius);
  j.at("row_count").get_to(c.row_count);
  j.at("row_size_bytes").get_to(c.row_size_bytes);
  j.at("bank_count").get_to(c.bank_count);
  j.at("line_bytes").get_to(c.line_bytes);
  j.at("llc_sets").get_to(c.llc_sets);
  j.at("llc_ways").get_to(c.llc_ways);
  j.at("trc_ns").get_to(c.trc_ns);
  j.at("window_ns").get_to(c.window_ns);
  j.at("page_policy").get_to(c.page_policy);
  j.at("mode").get_to(c.mode);
  j.at("replacement").get_to(c.replacement);
  j.at("pattern").get_to(c.pattern);
  j.at("seed").get_to(c.seed);
}

inline void to_json(nlohmann::ordered_json& j, const WindowStats& w) {
  j = nlohmann::ordered_json{{"index", w.index},
                             {"unique_rows_demand", w.unique_rows_demand},
                             {"unique_rows_all", w.unique_rows_all},
                             {"mitigations", w.mitigations},
                             {"peak_capacity", w.peak_capacity},
                             {"sac_histogram", w.sac_histogram}};
}

inline void from_json(const nlohmann::ordered_json& j, WindowStats& w) {
  j.at("index").get_to(w.index);
  j.at("unique_rows_demand").get_to(w.unique_rows_demand);
  j.at("unique_rows_all").get_to(w.unique_rows_all);
  j.at("mitigations").get_to(w.mitigations);
  j.at("peak_capacity").get_to(w.peak_capacity);
  j.at("sac_histogram").get_to(w.sac_histogram);
}

inline void to_json(nlohmann::ordered_json& j, const OracleSummary& o) {
  j = nlohmann::ordered_json{{"mode", o.mode},
                             {"theorem1_violations", o.theorem1_violations},
                             {"refresh_window_violations", o.refresh_window_violations},
                             {"exactness_mismatches", o.exactness_mismatches}};
}

inline void from_json(const nlohmann::ordered_json& j, OracleSummary& o) {
  j.at("mode").get_to(o.mode);
  j.at("theorem1_violations").get_to(o.theorem1_violations);
  j.at("refresh_window_violations").get_to(o.refresh_window_violations);
  j.at("exactness_mismatches").get_to(o.exactness_mismatches);
}

inline void to_json(nlohmann::ordered_json& j, const RunReport& r) {
  j = nlohmann::ordered_json::object();
  j["config"] = r.config;
  j["activations"] = {{"accesses", r.accesses},
                      {"total", r.activations},
                      {"demand", r.demand_activations},
                      {"victim_refresh", r.victim_refresh_activations},
                      {"metadata", r.metadata_activations}};
  j["mitigation"] = {{"mitigations", r.mitigations},
                     {"victim_refreshes", r.victim_refreshes},
                     {"max_cascade_depth", r.max_cascade_depth}};
  j["llc"] = {{"hits", r.llc_hits},
              {"misses", r.llc_misses},
              {"baseline_hits", r.baseline_llc_hits},
              {"baseline_misses", r.baseline_llc_misses},
              {"miss_delta_pct", r.miss_delta_pct()},
              {"forced_evictions", r.forced_evictions},
              {"forced_writebacks", r.forced_writebacks},
              {"writebacks", r.writebacks}};
  j["mtt"] = {{"reads", r.mtt_reads},
              {"writes", r.mtt_writes},
              {"resets", r.mtt_resets},
              {"reset_line_writes", r.mtt_reset_line_writes}};
  j["escalations"] = r.escalations;
  j["capacity"] = {{"mean", r.capacity_mean},
                   {"mean_per_event", r.capacity_mean_per_event},
                   {"peak", r.capacity_peak}};
  j["sim_time_ns"] = r.sim_time_ns;
  j["windows"] = r.windows;
  j["oracle"] = r.oracle;
}

inline void from_json(const nlohmann::ordered_json& j, RunReport& r) {
  j.at("config").get_to(r.config);
  const auto& a = j.at("activations");
  a.at("accesses").get_to(r.accesses);
  a.at("total").get_to(r.activations);
  a.at("demand").get_to(r.demand_activations);
  a.at("victim_refresh").get_to(r.victim_refresh_activations);
  a.at("metadata").get_to(r.metadata_activations);
  const auto& m = j.at("mitigation");
  m.at("mitigations").get_to(r.mitigations);
  m.at("victim_refreshes").get_to(r.victim_refreshes);
  m.at("max_cascade_depth").get_to(r.max_cascade_depth);
  const auto& l = j.at("llc");
  l.at("hits").get_to(r.llc_hits);
  l.at("misses").get_to(r.llc_misses);
  l.at("baseline_hits").get_to(r.baseline_llc_hits);
  l.at("baseline_misses").get_to(r.baseline_llc_misses);
  l.at("forced_evictions").get_to(r.forced_evictions);
  l.at("forced_writebacks").get_to(r.forced_writebacks);
  l.at("writebacks").get_to(r.writebacks);
  const auto& t = j.at("mtt");
  t.at("reads").get_to(r.mtt_reads);
  t.at("writes").get_to(r.mtt_writes);
  t.at("resets").get_to(r.mtt_resets);
  t.at("reset_line_writes").get_to(r.mtt_reset_line_writes);
  j.at("escalations").get_to(r.escalations);
  const auto& c = j.at("capacity");
  c.at("mean").get_to(r.capacity_mean);
  c.at("mean_per_event").get_to(r.capacity_mean_per_event);
  c.at("peak").get_to(r.capacity_peak);
  j.at("sim_time_ns").get_to(r.sim_time_ns);
  j.at("windows").get_to(r.windows);
  j.at("oracle").get_to(r.oracle);
}

inline std::string to_json_string(const RunReport& r) {
  nlohmann::ordered_json j = r;
  return j.dump(2) + "\n";
}

inline RunReport report_from_json(const std::string& text) {
  return nlohmann::ordered_json::parse(text).get<RunReport>();
}

/// Columns of the per-run CSV row, in order.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "variant",          "t_rh",           "blast_radius",     "llc_sets",        "llc_ways",
      "row_count",        "pattern",        "seed",             "accesses",        "activations",
      "demand",           "victim_refresh", "metadata",         "mitigations",     "victim_refreshes",
      "max_cascade_depth", "llc_hits",      "llc_misses",       "baseline_llc_misses", "miss_delta_pct",
      "forced_evictions", "mtt_reads",      "mtt_writes",       "mtt_resets",      "escalations",
      "capacity_mean",    "capacity_peak",  "oracle_violations", "status"};
  return cols;
}

inline std::string csv_header() {
  std::string out;
  for (const auto& c : csv_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out + "\n";
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace detail

inline std::string csv_row(const RunReport& r, const std::string& status = "ok") {
  const auto& c = r.config;
  std::ostringstream o;
  o << c.variant << ',' << c.t_rh << ',' << c.blast_radius << ',' << c.llc_sets << ',' << c.llc_ways << ','
    << c.row_count << ',' << c.pattern << ',' << c.seed << ',' << r.accesses << ',' << r.activations << ','
    << r.demand_activations << ',' << r.victim_refresh_activations << ',' << r.metadata_activations << ','
    << r.mitigations << ',' << r.victim_refreshes << ',' << r.max_cascade_depth << ',' << r.llc_hits << ','
    << r.llc_misses << ',' << r.baseline_llc_misses << ',' << detail::fmt_double(r.miss_delta_pct()) << ','
    << r.forced_evictions << ',' << r.mtt_reads << ',' << r.mtt_writes << ',' << r.mtt_resets << ','
    << r.escalations << ',' << detail::fmt_double(r.capacity_mean) << ',' << detail::fmt_double(r.capacity_peak)
    << ',' << (r.oracle.theorem1_violations + r.oracle.refresh_window_violations + r.oracle.exactness_mismatches)
    << ',' << status << '\n';
  return o.str();
}

/// Mitigation log as JSON lines: {"time_ns":..,"row_id":..,"variant":..}.
inline std::string mitigation_log_jsonl(const std::vector<MitigationRecord>& log, Variant v) {
  std::string out;
  for (const auto& m : log) {
    nlohmann::ordered_json j{{"time_ns", m.time_ns}, {"row_id", m.aggressor_row}, {"variant", to_string(v)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

/// Variant-free form of the log used for cross-tracker byte comparison.
/// `row_limit` drops rows at or above it (0 keeps everything).
inline std::string canonical_log(const std::vector<MitigationRecord>& log, std::uint64_t row_limit = 0) {
  std::string out;
  char buf[64];
  for (const auto& m : log) {
    if (row_limit != 0 && m.aggressor_row >= row_limit) continue;
    const int n = std::snprintf(buf, sizeof buf, "%llu %llu\n", static_cast<unsigned long long>(m.time_ns),
                                static_cast<unsigned long long>(m.aggressor_row));
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace rowtrack
