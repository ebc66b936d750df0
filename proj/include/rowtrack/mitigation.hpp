#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "rowtrack/error.hpp"
#include "rowtrack/events.hpp"
#include "rowtrack/geometry.hpp"

namespace rowtrack {

struct MitigationRecord {
  std::uint64_t event_index = 0;  // activation that triggered it
  std::uint64_t time_ns = 0;
  std::uint64_t aggressor_row = 0;
  std::uint32_t blast_radius = 1;
  std::vector<std::uint64_t> victim_rows;

  friend bool operator==(const MitigationRecord&, const MitigationRecord&) = default;
};

/// Neighbours refreshed for `aggressor`, nearest first (-1, +1, -2, +2, ...),
/// clipped at the edges of its bank.
inline std::vector<std::uint64_t> victim_rows(const Geometry& geo, std::uint64_t aggressor, std::uint32_t radius) {
  if (radius < 1 || radius > 4) throw Error(Errc::InvalidValue, "blast radius must be in [1, 4]");
  if (aggressor >= geo.row_count()) throw Error(Errc::RowOutOfRange, "row " + std::to_string(aggressor));
  const std::uint64_t per_bank = geo.layout().rows_per_bank;
  const std::uint64_t lo = aggressor / per_bank * per_bank;
  const std::uint64_t hi = lo + per_bank - 1;
  std::vector<std::uint64_t> out;
  for (std::uint64_t d = 1; d <= radius; ++d) {
    if (aggressor >= lo + d) out.push_back(aggressor - d);
    if (aggressor + d <= hi) out.push_back(aggressor + d);
  }
  return out;
}

/// DRFM: builds the record and one victim_refresh activation per victim.
inline std::vector<ActivationEvent> execute_mitigation(const Geometry& geo, std::uint64_t aggressor, std::uint64_t time_ns,
                                                       std::uint32_t radius, MitigationRecord* record = nullptr) {
  auto victims = victim_rows(geo, aggressor, radius);
  std::vector<ActivationEvent> out;
  out.reserve(victims.size());
  for (auto v : victims) out.push_back({time_ns, v, Cause::victim_refresh});
  if (record) {
    record->time_ns = time_ns;
    record->aggressor_row = aggressor;
    record->blast_radius = radius;
    record->victim_rows = std::move(victims);
  }
  return out;
}

struct CascadeResult {
  std::uint64_t mitigations = 0;
  std::uint64_t processed = 0;
  std::uint32_t max_depth = 0;
};

/// Processes queued activations FIFO until quiescent. `step` handles one
/// event and returns the follow-up activations it caused plus whether it
/// mitigated. Throws CascadeLimit when `cap` events are exceeded.
struct CascadeStep {
  bool mitigated = false;
  std::vector<ActivationEvent> follow_ups;
};

inline CascadeResult drain_cascade(std::deque<ActivationEvent> queue,
                                   const std::function<CascadeStep(const ActivationEvent&)>& step,
                                   std::uint64_t cap = 64'000'000) {
  CascadeResult res;
  std::deque<std::uint32_t> depth(queue.size(), 1);
  while (!queue.empty()) {
    if (res.processed >= cap) throw Error(Errc::CascadeLimit, "cascade exceeded " + std::to_string(cap) + " events");
    const ActivationEvent ev = queue.front();
    const std::uint32_t d = depth.front();
    queue.pop_front();
    depth.pop_front();
    ++res.processed;
    const CascadeStep s = step(ev);
    if (s.mitigated) {
      ++res.mitigations;
      res.max_depth = std::max(res.max_depth, d);
    }
    for (const auto& f : s.follow_ups) {
      queue.push_back(f);
      depth.push_back(d + 1);
    }
  }
  return res;
}

}  // namespace rowtrack
