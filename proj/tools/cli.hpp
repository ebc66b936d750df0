#pragma once

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rowtrack/rowtrack.hpp"

namespace rowtrack::cli {

enum ExitCode : int { kOk = 0, kViolation = 1, kUsage = 2 };

struct TrackerFlags {
  std::string config;
  std::optional<std::string> variant;
  std::optional<std::uint32_t> trh;
  std::optional<std::uint32_t> blast;
  std::optional<std::uint32_t> counter_bits;
};

struct PatternFlags {
  std::string pattern = "uniform";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> rows;
  std::uint64_t pool_size = 64;
  std::uint32_t aggressors = 1;
  std::uint32_t decoys = 8;
  double zipf_s = 1.0;
  std::uint64_t spacing = 0;
  std::uint64_t duration = 0;
  std::uint64_t count = 0;
  std::uint64_t start = 0;
  bool refresh_discount = false;
  double write_fraction = 0.0;
  std::uint32_t thrash_multiple = 2;
  std::uint32_t thrash_sets = 0;
};

struct RunFlags {
  std::string trace;
  std::string out;
  std::string format = "json";
  std::string oracle = "post";
  std::string mode = "auto";
  std::string replacement = "srrip";
  std::string mitigation_log;
  std::uint64_t warmup = 0;
};

inline void add_tracker_flags(CLI::App& app, TrackerFlags& f) {
  app.add_option("--config", f.config, "Configuration file (key = value)")->required();
  app.add_option("--variant", f.variant, "start-s | start-d | start-m | start-lite | ideal");
  app.add_option("--trh", f.trh, "Rowhammer threshold");
  app.add_option("--blast", f.blast, "Blast radius (1-4)");
  app.add_option("--counter-bits", f.counter_bits, "Counter width (0 = narrowest that fits)");
}

inline void add_pattern_flags(CLI::App& app, PatternFlags& p) {
  app.add_option("--pattern", p.pattern, "uniform | zipf | stream | single-sided | double-sided | many-sided | "
                                         "decoy-rotation | mtt-thrash");
  app.add_option("--seed", p.seed, "RNG seed");
  app.add_option("--rows", p.rows, "Explicit row pool (victim first for sided patterns)")->delimiter(',');
  app.add_option("--pool-size", p.pool_size, "Random pool size when --rows is absent");
  app.add_option("--aggressors", p.aggressors, "Aggressor rows (single/many-sided, decoy-rotation)");
  app.add_option("--decoys", p.decoys, "Decoy burst length");
  app.add_option("--zipf-s", p.zipf_s, "Zipf skew");
  app.add_option("--spacing", p.spacing, "Inter-access spacing in ns (default tRC)");
  app.add_option("--duration", p.duration, "Trace duration in ns");
  app.add_option("--count", p.count, "Number of accesses");
  app.add_option("--start", p.start, "Start time in ns");
  app.add_flag("--refresh-discount", p.refresh_discount, "Cap each bank at ACT_max per window");
  app.add_option("--write-fraction", p.write_fraction, "Fraction of writes");
  app.add_option("--thrash-multiple", p.thrash_multiple, "mtt-thrash pool size as a multiple of 8-way capacity");
  app.add_option("--thrash-sets", p.thrash_sets, "Limit mtt-thrash to this many sets (0 = all eligible)");
}

inline void add_run_flags(CLI::App& app, RunFlags& r) {
  app.add_option("--trace", r.trace, "Trace file (access or activation format, optional .gz)");
  app.add_option("--out", r.out, "Report path (default stdout)");
  app.add_option("--format", r.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--oracle", r.oracle, "inline | post | off")->check(CLI::IsMember({"inline", "post", "off"}));
  app.add_option("--mode", r.mode, "auto | cache | direct")->check(CLI::IsMember({"auto", "cache", "direct"}));
  app.add_option("--replacement", r.replacement, "srrip | lru")->check(CLI::IsMember({"srrip", "lru"}));
  app.add_option("--mitigation-log", r.mitigation_log, "Write the mitigation log (JSON lines)");
  app.add_option("--warmup", r.warmup, "Leading accesses that only warm the LLC");
}

inline SimConfig resolve_config(const TrackerFlags& f) {
  if (!std::filesystem::exists(f.config)) throw Error(Errc::Io, "config file not found: " + f.config);
  SimConfig c = load_config(f.config);
  if (f.variant) c.tracker.variant = parse_variant(*f.variant);
  if (f.trh) c.tracker.t_rh = *f.trh;
  if (f.blast) c.tracker.blast_radius = *f.blast;
  if (f.counter_bits) c.tracker.counter_bits = *f.counter_bits;
  return c;
}

inline PatternSpec build_pattern(const Geometry& geo, const PatternFlags& p) {
  PatternSpec s;
  s.pattern = parse_pattern(p.pattern);
  s.seed = p.seed;
  s.aggressor_rows = p.aggressors;
  s.decoy_count = p.decoys;
  s.zipf_s = p.zipf_s;
  s.spacing_ns = p.spacing;
  s.duration_ns = p.duration;
  s.access_count = p.count;
  s.start_ns = p.start;
  s.refresh_discount = p.refresh_discount;
  s.write_fraction = p.write_fraction;
  s.thrash_multiple = p.thrash_multiple;
  s.thrash_sets = p.thrash_sets;
  if (s.duration_ns == 0 && s.access_count == 0) s.access_count = 100000;
  if (!p.rows.empty()) {
    s.row_pool = p.rows;
  } else if (s.pattern == Pattern::double_sided || s.pattern == Pattern::many_sided) {
    // Victim in the middle of a random bank other than the last one.
    const std::uint64_t rpb = geo.layout().rows_per_bank;
    const std::uint64_t banks = std::max<std::uint64_t>(1, geo.config().bank_count - 1);
    const std::uint64_t bank = random_pool(geo, 1, p.seed, true)[0] / rpb % banks;
    s.row_pool = {bank * rpb + rpb / 2};
  } else if (s.pattern != Pattern::mtt_thrash) {
    s.row_pool = random_pool(geo, p.pool_size, p.seed, true);
  }
  return s;
}

inline FrontendMode pick_mode(const std::string& mode, std::optional<Pattern> pattern) {
  if (mode == "cache") return FrontendMode::cache;
  if (mode == "direct") return FrontendMode::direct;
  return pattern && is_adversarial(*pattern) ? FrontendMode::direct : FrontendMode::cache;
}

/// Input of a run: either a parsed trace file or a generated pattern.
struct Workload {
  Trace trace;
  std::optional<Pattern> pattern;
  std::string label;
};

inline Workload load_workload(const Geometry& geo, const RunFlags& r, const PatternFlags& p) {
  Workload w;
  if (!r.trace.empty()) {
    w.trace = read_trace(r.trace);
    w.label = "trace";
    return w;
  }
  const PatternSpec spec = build_pattern(geo, p);
  w.pattern = spec.pattern;
  w.label = std::string(to_string(spec.pattern));
  w.trace.kind = TraceKind::access;
  w.trace.accesses = generate(spec, geo);
  return w;
}

struct RunResult {
  RunReport report;
  std::vector<MitigationRecord> log;
  Variant variant = Variant::ideal;
};

inline RunResult simulate(const SimConfig& c, const Workload& w, const RunFlags& r, std::uint64_t seed) {
  SimOptions o;
  o.mode = pick_mode(r.mode, w.pattern);
  o.oracle = parse_oracle_mode(r.oracle);
  o.replacement = parse_replacement(r.replacement);
  o.warmup_accesses = r.warmup;
  o.pattern_label = w.label;
  o.seed = seed;
  Simulator sim(c.geometry, c.tracker, o);
  sim.run(w.trace);
  RunResult res;
  res.report = sim.finish();
  res.log = sim.mitigations();
  res.variant = c.tracker.variant;
  if (!res.report.oracle.clean()) {
    for (const auto& v : sim.violations()) {
      spdlog::error("oracle: {} row {} at event {} (count {})", to_string(v.kind), v.row, v.event_index, v.count);
    }
    for (const auto& m : sim.mismatches()) {
      spdlog::error("oracle: row {} tracker count {} != true count {}", m.row, m.tracker, m.truth);
    }
  }
  return res;
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot write " + path);
  f << text;
}

inline void setup_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("rowtrack");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("ROWTRACK_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  });
}

inline int cmd_run(const TrackerFlags& tf, const PatternFlags& pf, const RunFlags& rf, std::ostream& out) {
  const SimConfig c = resolve_config(tf);
  const Geometry geo(c.geometry, c.tracker);
  const Workload w = load_workload(geo, rf, pf);
  spdlog::info("run: {} over {} records", to_string(c.tracker.variant), w.trace.size());
  const RunResult res = simulate(c, w, rf, pf.seed);
  if (!rf.mitigation_log.empty()) write_output(rf.mitigation_log, mitigation_log_jsonl(res.log, res.variant), out);
  const std::string text = rf.format == "csv" ? csv_header() + csv_row(res.report) : to_json_string(res.report);
  write_output(rf.out, text, out);
  if (!res.report.oracle.clean()) {
    spdlog::error("oracle reported {} theorem-1, {} refresh-window and {} exactness violations",
                  res.report.oracle.theorem1_violations, res.report.oracle.refresh_window_violations,
                  res.report.oracle.exactness_mismatches);
    return kViolation;
  }
  return kOk;
}

inline int cmd_gen(const std::string& config, const PatternFlags& pf, const std::string& out_path, bool activations,
                   std::ostream& out) {
  TrackerFlags tf;
  tf.config = config;
  SimConfig c = resolve_config(tf);
  c.tracker.variant = Variant::ideal;
  const Geometry geo(c.geometry, c.tracker);
  const auto accesses = generate(build_pattern(geo, pf), geo);
  spdlog::info("gen: {} accesses", accesses.size());
  if (out_path.empty() || out_path == "-") {
    out << (activations ? format_trace(to_activations(geo, accesses)) : format_trace(accesses));
  } else if (activations) {
    write_trace(to_activations(geo, accesses), out_path);
  } else {
    write_trace(accesses, out_path);
  }
  return kOk;
}

struct SweepFlags {
  std::string axis;
  std::vector<std::uint64_t> values;
  std::string out;
  std::string out_dir;
  unsigned jobs = 1;
};

inline std::vector<std::uint64_t> sweep_values(const SweepFlags& s) {
  if (!s.values.empty()) return s.values;
  if (s.axis == "trh") return {4096, 1024, 256, 64, 16};
  if (s.axis == "blast") return {1, 2, 3, 4};
  throw Error(Errc::InvalidValue, "axis '" + s.axis + "' needs explicit --values");
}

inline int cmd_sweep(const TrackerFlags& tf, const PatternFlags& pf, const RunFlags& rf, const SweepFlags& sf,
                     std::ostream& out) {
  const SimConfig base = resolve_config(tf);
  const auto values = sweep_values(sf);
  if (values.empty()) throw Error(Errc::InvalidValue, "sweep axis has no values");

  // One workload for every point so the axis is the only thing that changes.
  SimConfig probe = base;
  probe.tracker.variant = Variant::ideal;
  const Geometry probe_geo(probe.geometry, probe.tracker);
  const Workload w = load_workload(probe_geo, rf, pf);

  std::vector<std::string> rows(values.size());
  bool violated = false;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      SimConfig c = base;
      if (sf.axis == "trh") c.tracker.t_rh = static_cast<std::uint32_t>(values[i]);
      else if (sf.axis == "blast") c.tracker.blast_radius = static_cast<std::uint32_t>(values[i]);
      else c.geometry.llc_sets = static_cast<std::uint32_t>(values[i]);
      try {
        const RunResult res = simulate(c, w, rf, pf.seed);
        std::lock_guard lock(mu);
        violated = violated || !res.report.oracle.clean();
        rows[i] = csv_row(res.report, res.report.oracle.clean() ? "ok" : "violation");
      } catch (const Error& e) {
        RunReport empty;
        empty.config.variant = std::string(to_string(c.tracker.variant));
        empty.config.t_rh = c.tracker.t_rh;
        empty.config.blast_radius = c.tracker.blast_radius;
        empty.config.llc_sets = c.geometry.llc_sets;
        empty.config.llc_ways = c.geometry.llc_ways;
        empty.config.row_count = c.geometry.row_count;
        empty.config.pattern = w.label;
        empty.config.seed = pf.seed;
        std::lock_guard lock(mu);
        rows[i] = csv_row(empty, std::string(to_string(e.code())));
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(sf.jobs, static_cast<unsigned>(values.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  std::string csv = csv_header();
  for (const auto& r : rows) csv += r;
  std::string path = sf.out;
  if (path.empty() && !sf.out_dir.empty()) {
    std::filesystem::create_directories(sf.out_dir);
    path = (std::filesystem::path(sf.out_dir) / ("sweep_" + sf.axis + ".csv")).string();
  }
  write_output(path, csv, out);
  return violated ? kViolation : kOk;
}

inline int cmd_compare(const TrackerFlags& tf, const PatternFlags& pf, const RunFlags& rf, std::ostream& out) {
  const SimConfig base = resolve_config(tf);
  SimConfig probe = base;
  probe.tracker.variant = Variant::ideal;
  const Geometry probe_geo(probe.geometry, probe.tracker);
  const Workload w = load_workload(probe_geo, rf, pf);
  const std::uint64_t last_bank = probe_geo.row_count() - probe_geo.layout().rows_per_bank;

  std::map<Variant, RunResult> results;
  for (auto v : {Variant::ideal, Variant::start_s, Variant::start_d, Variant::start_m, Variant::start_lite}) {
    SimConfig c = base;
    c.tracker.variant = v;
    c.tracker.max_state_override.reset();
    try {
      results.emplace(v, simulate(c, w, rf, pf.seed));
    } catch (const ConfigError& e) {
      out << to_string(v) << ": skipped (" << e.what() << ")\n";
    }
  }
  const bool any_mtt = std::any_of(results.begin(), results.end(),
                                   [](const auto& kv) { return kv.second.report.metadata_activations > 0; });
  const auto& ref = results.at(Variant::ideal);
  const std::string ref_log = canonical_log(ref.log, any_mtt ? last_bank : 0);
  int rc = kOk;
  for (const auto& [v, res] : results) {
    const bool same = canonical_log(res.log, any_mtt ? last_bank : 0) == ref_log;
    const bool clean = res.report.oracle.clean();
    out << to_string(v) << ": mitigations=" << res.report.mitigations << " log=" << (same ? "identical" : "DIFFERENT")
        << " oracle=" << (clean ? "clean" : "VIOLATIONS") << "\n";
    if (!same || !clean) rc = kViolation;
  }
  return rc;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  setup_logging();
  CLI::App app{"rowtrack: START Rowhammer tracker simulator"};
  app.require_subcommand(1);

  TrackerFlags tf;
  PatternFlags pf;
  RunFlags rf;
  SweepFlags sf;

  auto* run = app.add_subcommand("run", "Simulate one tracker over a trace or generated pattern");
  add_tracker_flags(*run, tf);
  add_pattern_flags(*run, pf);
  add_run_flags(*run, rf);

  std::string gen_out;
  bool gen_activations = false;
  auto* gen = app.add_subcommand("gen", "Write a synthetic trace");
  gen->add_option("--config", tf.config, "Configuration file")->required();
  add_pattern_flags(*gen, pf);
  gen->add_option("--out", gen_out, "Output trace (.gz compresses)");
  gen->add_flag("--activations", gen_activations, "Write an activation trace instead of accesses");

  auto* sweep = app.add_subcommand("sweep", "Run one simulation per axis value; CSV output");
  add_tracker_flags(*sweep, tf);
  add_pattern_flags(*sweep, pf);
  add_run_flags(*sweep, rf);
  sweep->add_option("--axis", sf.axis, "trh | blast | llc-sets")
      ->required()
      ->check(CLI::IsMember({"trh", "blast", "llc-sets"}));
  sweep->add_option("--values", sf.values, "Axis values (comma separated)")->delimiter(',');
  sweep->add_option("--out-dir", sf.out_dir, "Directory for sweep_<axis>.csv");
  sweep->add_option("--jobs", sf.jobs, "Concurrent runs");

  auto* compare = app.add_subcommand("compare", "Run every variant and diff their mitigation logs");
  add_tracker_flags(*compare, tf);
  add_pattern_flags(*compare, pf);
  add_run_flags(*compare, rf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*run) return cmd_run(tf, pf, rf, out);
    if (*gen) return cmd_gen(tf.config, pf, gen_out, gen_activations, out);
    if (*sweep) {
      sf.out = rf.out;
      return cmd_sweep(tf, pf, rf, sf, out);
    }
    if (*compare) return cmd_compare(tf, pf, rf, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace rowtrack::cli
