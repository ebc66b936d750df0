#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rowtrack/config.hpp"
#include "rowtrack/events.hpp"
#include "rowtrack/frontend.hpp"
#include "rowtrack/geometry.hpp"
#include "rowtrack/metrics.hpp"
#include "rowtrack/mitigation.hpp"
#include "rowtrack/oracle.hpp"
#include "rowtrack/trace.hpp"
#include "rowtrack/tracker.hpp"

namespace rowtrack {

enum class FrontendMode : std::uint8_t { cache, direct };
enum class OracleMode : std::uint8_t { off, post, inline_ };

constexpr std::string_view to_string(FrontendMode m) { return m == FrontendMode::cache ? "cache" : "direct"; }

constexpr std::string_view to_string(OracleMode m) {
  return m == OracleMode::off ? "off" : m == OracleMode::post ? "post" : "inline";
}

inline OracleMode parse_oracle_mode(std::string_view s) {
  const auto n = detail::normalize_name(s);
  if (n == "off") return OracleMode::off;
  if (n == "post") return OracleMode::post;
  if (n == "inline") return OracleMode::inline_;
  throw Error(Errc::InvalidValue, "unknown oracle mode '" + std::string(s) + "'");
}

inline FrontendMode parse_frontend_mode(std::string_view s) {
  const auto n = detail::normalize_name(s);
  if (n == "cache") return FrontendMode::cache;
  if (n == "direct") return FrontendMode::direct;
  throw Error(Errc::InvalidValue, "unknown frontend mode '" + std::string(s) + "'");
}

struct SimOptions {
  FrontendMode mode = FrontendMode::cache;
  OracleMode oracle = OracleMode::post;
  Replacement replacement = Replacement::srrip;
  bool count_writeback_acts = false;
  std::uint64_t warmup_accesses = 0;
  std::uint64_t cascade_cap = 64'000'000;
  // Inline mode: full snapshot comparison every N activations (0: only at
  // window ends and at the end of the run).
  std::uint64_t exactness_interval = 0;
  bool record_hits = false;
  bool record_reservations = false;
  bool check_reservation_invariant = false;
  std::string pattern_label;
  std::uint64_t seed = 0;
};

struct ReservationLogEntry {
  std::uint64_t access_index = 0;  // reservation happened while serving this access
  bool release = false;
  std::uint32_t set = 0;
  std::uint32_t way = 0;
};

/// One isolated simulation: frontend, tracker, mitigation loop, oracle and
/// metrics. Feed accesses (or raw activations) in time order, then finish().
class Simulator : private ReservationPort {
 public:
  Simulator(const GeometryConfig& g, const TrackerConfig& t, SimOptions opts = {})
      : geo_(g, t),
        opts_(std::move(opts)),
        frontend_(geo_, FrontendOptions{opts_.replacement, opts_.count_writeback_acts, opts_.mode == FrontendMode::direct}),
        shadow_(geo_.sets(), geo_.ways(), opts_.replacement),
        truth_(geo_.layout().effective_threshold, g.window_ns) {
    tracker_ = make_tracker(geo_, this);
    cap_peak_window_ = current_fraction();
  }

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  const Geometry& geometry() const noexcept { return geo_; }
  const Tracker& tracker() const noexcept { return *tracker_; }
  Tracker& tracker() noexcept { return *tracker_; }
  const MemoryFrontend& frontend() const noexcept { return frontend_; }
  const std::vector<ActivationEvent>& events() const noexcept { return events_; }
  const std::vector<MitigationRecord>& mitigations() const noexcept { return mitigations_; }
  const std::vector<std::uint8_t>& hit_log() const noexcept { return hit_log_; }
  const std::vector<ReservationLogEntry>& reservation_log() const noexcept { return reservation_log_; }
  const std::vector<OracleViolation>& violations() const noexcept { return violations_; }
  const std::vector<CountMismatch>& mismatches() const noexcept { return mismatches_; }

  /// Full path: LLC + row buffer, then tracker.
  void access(const MemoryAccess& a) {
    if (warmed_ < opts_.warmup_accesses) {
      ++warmed_;
      frontend_.warm(a);
      if (opts_.mode == FrontendMode::cache) shadow_.access(geo_.map_address(a.addr).line_addr, a.kind == AccessKind::write);
      return;
    }
    advance(a.time_ns);
    ++accesses_;
    if (opts_.mode == FrontendMode::cache) {
      const auto line = geo_.map_address(a.addr).line_addr;
      const bool shadow_hit = shadow_.access(line, a.kind == AccessKind::write).hit;
      shadow_hit ? ++baseline_hits_ : ++baseline_misses_;
    } else {
      ++baseline_misses_;
    }
    const AccessOutcome out = frontend_.access(a);
    if (opts_.record_hits) hit_log_.push_back(out.hit ? 1 : 0);
    if (out.writeback_activation) process(*out.writeback_activation);
    if (out.activation) process(*out.activation);
    if (opts_.check_reservation_invariant && !frontend_.cache().reservation_invariant_holds()) {
      throw Error(Errc::InvalidValue, "demand line resident in a reserved way");
    }
    ++access_index_;
  }

  /// Tracker-only path: the activation enters the mitigation loop directly.
  void activate(const ActivationEvent& e) {
    advance(e.time_ns);
    process(e);
    ++access_index_;
  }

  void run(const std::vector<MemoryAccess>& accesses) {
    for (const auto& a : accesses) access(a);
  }

  void run(const std::vector<ActivationEvent>& events) {
    for (const auto& e : events) activate(e);
  }

  void run(const Trace& t) { t.kind == TraceKind::access ? run(t.accesses) : run(t.activations); }

  /// Closes the run: integrates capacity to the last event, runs the
  /// post-pass oracle checks and assembles the report.
  RunReport finish() {
    integrate(last_time_);
    close_window_stats();
    RunReport r;
    fill_config(r.config);
    r.accesses = accesses_;
    r.activations = events_total_;
    r.demand_activations = by_cause_[0];
    r.victim_refresh_activations = by_cause_[1];
    r.metadata_activations = by_cause_[2];
    r.mitigations = mitigations_.size();
    r.victim_refreshes = victim_refreshes_;
    r.max_cascade_depth = max_depth_;
    const auto& fs = frontend_.stats();
    r.llc_hits = fs.hits;
    r.llc_misses = fs.misses;
    r.baseline_llc_hits = baseline_hits_;
    r.baseline_llc_misses = baseline_misses_;
    r.forced_evictions = fs.forced_evictions;
    r.forced_writebacks = fs.forced_writebacks;
    r.writebacks = fs.writebacks;
    const auto ms = tracker_->mtt_stats();
    r.mtt_reads = ms.reads;
    r.mtt_writes = ms.writes;
    r.mtt_resets = ms.resets;
    r.mtt_reset_line_writes = ms.reset_line_writes;
    r.escalations = tracker_->stats().escalations;
    const double span = static_cast<double>(last_time_ - first_time_.value_or(0));
    r.capacity_mean_per_event = events_total_ ? cap_event_sum_ / static_cast<double>(events_total_) : current_fraction();
    r.capacity_mean = span > 0 ? cap_integral_ / span : r.capacity_mean_per_event;
    r.capacity_peak = cap_peak_;
    r.sim_time_ns = last_time_ - first_time_.value_or(0);
    r.windows = windows_;
    r.oracle.mode = std::string(to_string(opts_.oracle));
    if (opts_.oracle != OracleMode::off) {
      if (opts_.oracle == OracleMode::post) {
        auto t1 = check_theorem1(events_, mitigations_, geo_.tracker().t_rh, geo_.config().window_ns);
        violations_.insert(violations_.end(), t1.begin(), t1.end());
        truth_ = replay_truth();
      }
      auto mm = check_exactness(tracker_->snapshot(), truth_);
      mismatches_.insert(mismatches_.end(), mm.begin(), mm.end());
      auto rw = check_refresh_window(events_, mitigations_, geo_.tracker().t_rh, geo_.config().window_ns);
      r.oracle.refresh_window_violations = rw.size();
      r.oracle.theorem1_violations = violations_.size();
      violations_.insert(violations_.end(), rw.begin(), rw.end());
      r.oracle.exactness_mismatches = mismatches_.size();
    }
    return r;
  }

 private:
  // ReservationPort: forwards to the frontend and optionally records.
  std::optional<Eviction> reserve_way(std::uint32_t set, std::uint32_t way) override {
    integrate(last_time_);
    if (opts_.record_reservations) reservation_log_.push_back({access_index_, false, set, way});
    return frontend_.reserve_way(set, way);
  }

  void release_all_reservations() override {
    integrate(last_time_);
    if (opts_.record_reservations) reservation_log_.push_back({access_index_, true, 0, 0});
    frontend_.release_all_reservations();
  }

  double current_fraction() const {
    return static_cast<double>(tracker_ ? tracker_->reserved_ways() : 0) /
           (static_cast<double>(geo_.sets()) * geo_.ways());
  }

  void integrate(std::uint64_t t) {
    if (!first_time_) return;
    if (t > cap_time_) {
      cap_integral_ += current_fraction() * static_cast<double>(t - cap_time_);
      cap_time_ = t;
    }
  }

  void advance(std::uint64_t t) {
    if (!first_time_) {
      first_time_ = t;
      cap_time_ = t;
      last_time_ = t;
      window_ = t / geo_.config().window_ns;
      window_stats_.index = window_;
    }
    if (t < last_time_) {
      throw Error(Errc::NonMonotonicTime, "time " + std::to_string(t) + " after " + std::to_string(last_time_));
    }
    const std::uint64_t W = geo_.config().window_ns;
    while (t / W > window_) {
      const std::uint64_t boundary = (window_ + 1) * W;
      integrate(boundary);
      last_time_ = boundary;
      close_window_stats();
      if (opts_.oracle == OracleMode::inline_) full_exactness();
      tracker_->window_reset(boundary);
      ++window_;
      window_stats_ = WindowStats{};
      window_stats_.index = window_;
      cap_peak_window_ = current_fraction();
      if (opts_.oracle == OracleMode::inline_) truth_.advance(boundary);
    }
    integrate(t);
    last_time_ = t;
  }

  void close_window_stats() {
    if (window_closed_for_ == window_ && windows_.size() > 0 && windows_.back().index == window_) return;
    window_stats_.unique_rows_demand = demand_rows_.size();
    window_stats_.unique_rows_all = all_rows_.size();
    window_stats_.peak_capacity = std::max(cap_peak_window_, current_fraction());
    window_stats_.sac_histogram = tracker_->sac_histogram();
    if (first_time_) windows_.push_back(window_stats_);
    window_closed_for_ = window_;
    demand_rows_.clear();
    all_rows_.clear();
  }

  void process(const ActivationEvent& first) {
    const auto step = [this](const ActivationEvent& ev) {
      const std::uint64_t idx = events_total_++;
      ++by_cause_[static_cast<unsigned>(ev.cause)];
      events_.push_back(ev);
      all_rows_.insert(ev.row_id);
      if (ev.cause == Cause::demand) demand_rows_.insert(ev.row_id);

      TrackerOutcome out = tracker_->on_activation(ev);

      const double f = current_fraction();
      cap_event_sum_ += f;
      cap_peak_ = std::max(cap_peak_, f);
      cap_peak_window_ = std::max(cap_peak_window_, f);

      if (opts_.oracle == OracleMode::inline_) inline_check(ev, idx, out.mitigated.has_value());

      CascadeStep s;
      for (auto row : out.metadata_rows) s.follow_ups.push_back({ev.time_ns, row, Cause::metadata});
      if (out.mitigated) {
        s.mitigated = true;
        MitigationRecord rec;
        rec.event_index = idx;
        auto victims = execute_mitigation(geo_, *out.mitigated, ev.time_ns, geo_.tracker().blast_radius, &rec);
        victim_refreshes_ += victims.size();
        s.follow_ups.insert(s.follow_ups.end(), victims.begin(), victims.end());
        mitigations_.push_back(std::move(rec));
        ++window_stats_.mitigations;
      }
      return s;
    };
    const auto res = drain_cascade(std::deque<ActivationEvent>{first}, step, opts_.cascade_cap);
    max_depth_ = std::max(max_depth_, res.max_depth);
    if (opts_.oracle == OracleMode::inline_ && opts_.exactness_interval != 0 &&
        events_total_ / opts_.exactness_interval != checked_at_ / opts_.exactness_interval) {
      checked_at_ = events_total_;
      full_exactness();
    }
  }

  void inline_check(const ActivationEvent& ev, std::uint64_t idx, bool mitigated) {
    const std::uint64_t c = truth_.apply(ev);
    const std::uint32_t te = geo_.layout().effective_threshold;
    if (mitigated) {
      if (c != te) violations_.push_back({ViolationKind::early, ev.row_id, idx, ev.time_ns, ev.time_ns, c});
      truth_.mitigate(ev.row_id);
    } else if (c == te) {
      violations_.push_back({ViolationKind::missed, ev.row_id, idx, ev.time_ns, ev.time_ns, c});
    }
    const std::uint32_t have = tracker_->count_of(ev.row_id);
    const std::uint64_t want = truth_.count(ev.row_id);
    if (have != want) mismatches_.push_back({ev.row_id, have, want});
  }

  void full_exactness() {
    auto mm = check_exactness(tracker_->snapshot(), truth_);
    mismatches_.insert(mismatches_.end(), mm.begin(), mm.end());
  }

  TruthState replay_truth() const {
    TruthState t(geo_.layout().effective_threshold, geo_.config().window_ns);
    std::size_t m = 0;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      t.apply(events_[i]);
      if (m < mitigations_.size() && mitigations_[m].event_index == i) {
        t.mitigate(mitigations_[m].aggressor_row);
        ++m;
      }
    }
    t.advance(last_time_);
    return t;
  }

  void fill_config(ConfigEcho& c) const {
    const auto& g = geo_.config();
    const auto& t = geo_.tracker();
    c.variant = std::string(to_string(t.variant));
    c.t_rh = t.t_rh;
    c.effective_threshold = geo_.layout().effective_threshold;
    c.counter_bits = geo_.layout().counter_bits;
    c.blast_radius = t.blast_radius;
    c.row_count = g.row_count;
    c.row_size_bytes = g.row_size_bytes;
    c.bank_count = g.bank_count;
    c.line_bytes = g.line_bytes;
    c.llc_sets = g.llc_sets;
    c.llc_ways = g.llc_ways;
    c.trc_ns = g.trc_ns;
    c.window_ns = g.window_ns;
    c.page_policy = std::string(to_string(g.page_policy));
    c.mode = std::string(to_string(opts_.mode));
    c.replacement = std::string(to_string(opts_.replacement));
    c.pattern = opts_.pattern_label;
    c.seed = opts_.seed;
  }

  Geometry geo_;
  SimOptions opts_;
  MemoryFrontend frontend_;
  SetAssocCache shadow_;
  std::unique_ptr<Tracker> tracker_;
  TruthState truth_;

  std::vector<ActivationEvent> events_;
  std::vector<MitigationRecord> mitigations_;
  std::vector<std::uint8_t> hit_log_;
  std::vector<ReservationLogEntry> reservation_log_;
  std::vector<OracleViolation> violations_;
  std::vector<CountMismatch> mismatches_;

  std::uint64_t warmed_ = 0;
  std::uint64_t accesses_ = 0;
  std::uint64_t access_index_ = 0;
  std::uint64_t events_total_ = 0;
  std::uint64_t checked_at_ = 0;
  std::array<std::uint64_t, 3> by_cause_{};
  std::uint64_t victim_refreshes_ = 0;
  std::uint32_t max_depth_ = 0;
  std::uint64_t baseline_hits_ = 0;
  std::uint64_t baseline_misses_ = 0;

  std::optional<std::uint64_t> first_time_;
  std::uint64_t last_time_ = 0;
  std::uint64_t window_ = 0;
  std::uint64_t window_closed_for_ = ~0ull;
  WindowStats window_stats_;
  std::vector<WindowStats> windows_;
  std::unordered_set<std::uint64_t> demand_rows_;
  std::unordered_set<std::uint64_t> all_rows_;

  double cap_integral_ = 0.0;
  std::uint64_t cap_time_ = 0;
  double cap_event_sum_ = 0.0;
  double cap_peak_ = 0.0;
  double cap_peak_window_ = 0.0;
};

struct MissDelta {
  std::uint64_t baseline_misses = 0;
  std::uint64_t tracked_misses = 0;
  double pct = 0.0;
};

/// Runs the trace against a reservation-free reference and against the
/// configured tracker; reports the relative increase in LLC misses.
inline MissDelta miss_delta(const GeometryConfig& g, const TrackerConfig& t, const std::vector<MemoryAccess>& trace,
                            SimOptions opts = {}) {
  opts.oracle = OracleMode::off;
  opts.mode = FrontendMode::cache;
  TrackerConfig ref = t;
  ref.variant = Variant::ideal;
  ref.max_state_override.reset();
  Simulator a(g, ref, opts);
  a.run(trace);
  const auto ra = a.finish();
  Simulator b(g, t, opts);
  b.run(trace);
  const auto rb = b.finish();
  MissDelta d{ra.llc_misses, rb.llc_misses, 0.0};
  if (d.baseline_misses != 0) {
    d.pct = 100.0 * (static_cast<double>(d.tracked_misses) - static_cast<double>(d.baseline_misses)) /
            static_cast<double>(d.baseline_misses);
  }
  return d;
}

}  // namespace rowtrack
