#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rowtrack/error.hpp"
#include "rowtrack/events.hpp"
#include "rowtrack/mitigation.hpp"
#include "rowtrack/tracker.hpp"

namespace rowtrack {

enum class ViolationKind : std::uint8_t {
  missed,          // threshold reached with no mitigation on that event
  early,           // mitigation at a count other than the effective threshold
  wrong_row,       // mitigation names a row the event did not activate
  refresh_window,  // t_rh activations inside one refresh period, no mitigation
};

constexpr std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::missed: return "missed";
    case ViolationKind::early: return "early";
    case ViolationKind::wrong_row: return "wrong_row";
    case ViolationKind::refresh_window: return "refresh_window";
  }
  return "?";
}

struct OracleViolation {
  ViolationKind kind = ViolationKind::missed;
  std::uint64_t row = 0;
  std::uint64_t event_index = 0;
  std::uint64_t first_time_ns = 0;
  std::uint64_t time_ns = 0;
  std::uint64_t count = 0;
};

/// Exact per-row activation counts since max(window start, last mitigation),
/// built only from the public event and mitigation streams.
class TruthState {
 public:
  TruthState(std::uint32_t effective_threshold, std::uint64_t window_ns)
      : threshold_(effective_threshold), window_ns_(window_ns) {}

  /// Applies one activation; returns the row's count after it.
  std::uint64_t apply(const ActivationEvent& e) {
    advance(e.time_ns);
    return ++counts_[e.row_id];
  }

  void advance(std::uint64_t time_ns) {
    const std::uint64_t w = window_ns_ == 0 ? 0 : time_ns / window_ns_;
    if (w != window_) {
      counts_.clear();
      window_ = w;
    }
  }

  void mitigate(std::uint64_t row) { counts_.erase(row); }

  std::uint64_t count(std::uint64_t row) const {
    auto it = counts_.find(row);
    return it == counts_.end() ? 0 : it->second;
  }

  std::uint64_t window() const noexcept { return window_; }
  std::uint32_t threshold() const noexcept { return threshold_; }

  CountSnapshot snapshot() const {
    CountSnapshot out;
    for (const auto& [r, c] : counts_) {
      if (c != 0) out.emplace_back(r, static_cast<std::uint32_t>(c));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::uint32_t threshold_;
  std::uint64_t window_ns_;
  std::uint64_t window_ = 0;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
};

namespace detail {
inline void require_ordered(std::span<const ActivationEvent> events, std::span<const MitigationRecord> mitigations) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].time_ns < events[i - 1].time_ns) {
      throw Error(Errc::UnorderedInput, "event " + std::to_string(i) + " goes back in time");
    }
  }
  for (std::size_t i = 0; i < mitigations.size(); ++i) {
    if (mitigations[i].event_index >= events.size()) {
      throw Error(Errc::UnorderedInput, "mitigation refers to event " + std::to_string(mitigations[i].event_index));
    }
    if (i > 0 && mitigations[i].event_index <= mitigations[i - 1].event_index) {
      throw Error(Errc::UnorderedInput, "mitigations not in event order");
    }
  }
}
}  // namespace detail

/// Every row must be mitigated on exactly the activation that brings its
/// true count to T_RH/2 (and, in strict mode, never at any other count).
inline std::vector<OracleViolation> check_theorem1(std::span<const ActivationEvent> events,
                                                   std::span<const MitigationRecord> mitigations, std::uint32_t t_rh,
                                                   std::uint64_t window_ns, bool strict = true) {
  detail::require_ordered(events, mitigations);
  const std::uint32_t te = t_rh / 2;
  TruthState truth(te, window_ns);
  std::vector<OracleViolation> out;
  std::size_t m = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const std::uint64_t c = truth.apply(e);
    const bool mitigated_here = m < mitigations.size() && mitigations[m].event_index == i;
    if (mitigated_here) {
      const auto& rec = mitigations[m++];
      if (rec.aggressor_row != e.row_id) {
        out.push_back({ViolationKind::wrong_row, rec.aggressor_row, i, e.time_ns, e.time_ns, c});
        continue;
      }
      if (strict && c != te) out.push_back({ViolationKind::early, e.row_id, i, e.time_ns, e.time_ns, c});
      truth.mitigate(e.row_id);
    } else if (c >= te) {
      if (c == te) out.push_back({ViolationKind::missed, e.row_id, i, e.time_ns, e.time_ns, c});
    }
  }
  return out;
}

/// End-to-end property: for any placement of the refresh period, no row
/// collects t_rh activations between two of its mitigations.
inline std::vector<OracleViolation> check_refresh_window(std::span<const ActivationEvent> events,
                                                         std::span<const MitigationRecord> mitigations,
                                                         std::uint32_t t_rh, std::uint64_t window_ns) {
  detail::require_ordered(events, mitigations);
  std::unordered_set<std::uint64_t> mitigated_at;
  for (const auto& r : mitigations) mitigated_at.insert(r.event_index);

  struct RowHistory {
    std::vector<std::uint64_t> times;
    std::vector<std::uint64_t> index;
  };
  std::unordered_map<std::uint64_t, RowHistory> rows;
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto& h = rows[events[i].row_id];
    h.times.push_back(events[i].time_ns);
    h.index.push_back(i);
  }

  std::vector<OracleViolation> out;
  for (const auto& [row, h] : rows) {
    std::size_t lo = 0;
    bool reported = false;
    for (std::size_t j = 0; j < h.times.size(); ++j) {
      while (h.times[j] - h.times[lo] >= window_ns) ++lo;
      if (!reported && j - lo + 1 >= t_rh) {
        out.push_back({ViolationKind::refresh_window, row, h.index[j], h.times[lo], h.times[j], j - lo + 1});
        reported = true;
      }
      if (mitigated_at.contains(h.index[j]) && events[h.index[j]].row_id == row) {
        lo = j + 1;
        reported = false;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.event_index < b.event_index; });
  return out;
}

struct CountMismatch {
  std::uint64_t row = 0;
  std::uint32_t tracker = 0;
  std::uint64_t truth = 0;
};

/// Compares a tracker's nonzero counts against the truth, both directions.
inline std::vector<CountMismatch> check_exactness(const CountSnapshot& tracker, const TruthState& truth) {
  std::vector<CountMismatch> out;
  const CountSnapshot t = truth.snapshot();
  std::size_t i = 0, j = 0;
  while (i < tracker.size() || j < t.size()) {
    if (j == t.size() || (i < tracker.size() && tracker[i].first < t[j].first)) {
      out.push_back({tracker[i].first, tracker[i].second, 0});
      ++i;
    } else if (i == tracker.size() || t[j].first < tracker[i].first) {
      out.push_back({t[j].first, 0, t[j].second});
      ++j;
    } else {
      if (tracker[i].second != t[j].second) out.push_back({t[j].first, tracker[i].second, t[j].second});
      ++i;
      ++j;
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const OracleViolation& v) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(v.kind);
  j["row_id"] = v.row;
  j["event_index"] = v.event_index;
  j["first_time_ns"] = v.first_time_ns;
  j["time_ns"] = v.time_ns;
  j["count"] = v.count;
  return j;
}

inline nlohmann::ordered_json to_json(const std::vector<OracleViolation>& vs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : vs) arr.push_back(to_json(v));
  return arr;
}

}  // namespace rowtrack
