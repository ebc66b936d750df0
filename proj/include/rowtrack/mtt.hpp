#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <unordered_map>
#include <vector>

#include "rowtrack/config.hpp"
#include "rowtrack/geometry.hpp"

namespace rowtrack {

struct MttStats {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t resets = 0;
  std::uint64_t reset_line_writes = 0;
};

/// Memory-mapped tracking table. Counters are stored sparsely; a per-set
/// epoch implements the lazy reset without touching every row.
class Mtt {
 public:
  explicit Mtt(const Geometry& geo)
      : geo_(&geo),
        region_(geo.mtt_region()),
        active_(geo.sets(), false),
        epoch_(geo.sets(), 0) {}

  const MttRegion& region() const noexcept { return region_; }
  const MttStats& stats() const noexcept { return stats_; }

  bool active(std::uint32_t set) const { return active_.at(set); }

  std::uint64_t mtt_row_of(std::uint64_t row_id) const {
    if (row_id >= geo_->row_count()) throw Error(Errc::RowOutOfRange, "row " + std::to_string(row_id));
    return region_.base_row + row_id * region_.counter_bytes / geo_->config().row_size_bytes;
  }

  bool is_mtt_row(std::uint64_t row_id) const noexcept { return row_id >= region_.base_row; }

  /// Zeroes every counter mapping to `set` and arms the set. Returns the
  /// MTT rows written when the per-line reset accounting is selected.
  std::vector<std::uint64_t> lazy_reset(std::uint32_t set, MttResetMode mode) {
    ++epoch_.at(set);
    active_[set] = true;
    ++stats_.resets;
    std::vector<std::uint64_t> rows;
    if (mode == MttResetMode::per_line) {
      std::set<std::uint64_t> lines;
      std::set<std::uint64_t> mtt_rows;
      const std::uint64_t rps = geo_->layout().rows_per_set;
      for (std::uint64_t t = 0; t < rps; ++t) {
        const std::uint64_t r = geo_->row_of(set, static_cast<std::uint32_t>(t));
        lines.insert(r * region_.counter_bytes / geo_->config().line_bytes);
        mtt_rows.insert(mtt_row_of(r));
      }
      stats_.reset_line_writes += lines.size();
      rows.assign(mtt_rows.begin(), mtt_rows.end());
    }
    return rows;
  }

  /// Reads the stored counter; the MTT copy becomes stale (zero by
  /// convention) because the LLC is authoritative from now on.
  std::uint32_t fetch(std::uint32_t set, std::uint64_t row_id) {
    ++stats_.reads;
    auto it = cells_.find(row_id);
    if (it == cells_.end()) return 0;
    const std::uint32_t v = it->second.epoch == epoch_[set] ? it->second.value : 0;
    cells_.erase(it);
    return v;
  }

  void write(std::uint32_t set, std::uint64_t row_id, std::uint32_t value) {
    ++stats_.writes;
    if (value == 0) {
      cells_.erase(row_id);
    } else {
      cells_[row_id] = Cell{value, epoch_[set]};
    }
  }

  /// Value currently held for `row_id` (0 if stale or never written).
  std::uint32_t peek(std::uint32_t set, std::uint64_t row_id) const {
    if (!active_[set]) return 0;
    auto it = cells_.find(row_id);
    if (it == cells_.end() || it->second.epoch != epoch_[set]) return 0;
    return it->second.value;
  }

  /// Window boundary: sets fall back to the cold-miss path until their
  /// next first eviction.
  void window_reset() { std::fill(active_.begin(), active_.end(), false); }

  std::vector<std::pair<std::uint64_t, std::uint32_t>> resident() const {
    std::vector<std::pair<std::uint64_t, std::uint32_t>> out;
    for (const auto& [row, cell] : cells_) {
      const auto set = geo_->map_row(row).set_index;
      if (active_[set] && cell.epoch == epoch_[set] && cell.value != 0) out.emplace_back(row, cell.value);
    }
    return out;
  }

 private:
  struct Cell {
    std::uint32_t value;
    std::uint32_t epoch;
  };

  const Geometry* geo_;
  MttRegion region_;
  std::vector<bool> active_;
  std::vector<std::uint32_t> epoch_;
  std::unordered_map<std::uint64_t, Cell> cells_;
  MttStats stats_;
};

}  // namespace rowtrack
