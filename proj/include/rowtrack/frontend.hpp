#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "rowtrack/error.hpp"
#include "rowtrack/events.hpp"
#include "rowtrack/geometry.hpp"

namespace rowtrack {

enum class Replacement : std::uint8_t { srrip, lru };

constexpr std::string_view to_string(Replacement r) { return r == Replacement::srrip ? "srrip" : "lru"; }

inline Replacement parse_replacement(std::string_view s) {
  const auto n = detail::normalize_name(s);
  if (n == "srrip") return Replacement::srrip;
  if (n == "lru") return Replacement::lru;
  throw Error(Errc::InvalidValue, "unknown replacement policy '" + std::string(s) + "'");
}

struct CacheLineState {
  bool valid = false;
  bool dirty = false;
  std::uint8_t rrpv = 3;
  std::uint64_t tag = 0;
  std::uint64_t stamp = 0;
};

struct Eviction {
  std::uint64_t line_addr = 0;
  bool dirty = false;
};

struct LookupResult {
  bool hit = false;
  bool bypass = false;  // every way of the set is reserved
  std::optional<Eviction> eviction;
};

/// Set-associative cache with a per-set mask of ways withheld from demand use.
class SetAssocCache {
 public:
  static constexpr std::uint8_t kMaxRrpv = 3;
  static constexpr std::uint8_t kInsertRrpv = 2;

  SetAssocCache(std::uint32_t sets, std::uint32_t ways, Replacement policy = Replacement::srrip)
      : sets_(sets), ways_(ways), set_bits_(static_cast<unsigned>(std::countr_zero(sets))), policy_(policy),
        lines_(std::size_t{sets} * ways), reserved_(sets, 0) {}

  std::uint32_t sets() const noexcept { return sets_; }
  std::uint32_t ways() const noexcept { return ways_; }

  std::uint32_t set_of(std::uint64_t line_addr) const noexcept { return static_cast<std::uint32_t>(line_addr & (sets_ - 1)); }

  LookupResult access(std::uint64_t line_addr, bool write) {
    const std::uint32_t set = set_of(line_addr);
    const std::uint64_t tag = line_addr >> set_bits_;
    ++clock_;
    LookupResult r;
    for (std::uint32_t w = 0; w < ways_; ++w) {
      auto& l = at(set, w);
      if (is_reserved(set, w) || !l.valid || l.tag != tag) continue;
      r.hit = true;
      l.rrpv = 0;
      l.stamp = clock_;
      l.dirty = l.dirty || write;
      return r;
    }
    const auto victim = choose_victim(set);
    if (!victim) {
      r.bypass = true;
      return r;
    }
    auto& l = at(set, *victim);
    if (l.valid) r.eviction = Eviction{(l.tag << set_bits_) | set, l.dirty};
    l = CacheLineState{true, write, kInsertRrpv, tag, clock_};
    return r;
  }

  bool contains(std::uint64_t line_addr) const {
    const std::uint32_t set = set_of(line_addr);
    const std::uint64_t tag = line_addr >> set_bits_;
    for (std::uint32_t w = 0; w < ways_; ++w) {
      const auto& l = at(set, w);
      if (!is_reserved(set, w) && l.valid && l.tag == tag) return true;
    }
    return false;
  }

  /// Withholds `way` from demand use; any occupant is evicted.
  std::optional<Eviction> reserve(std::uint32_t set, std::uint32_t way) {
    if (set >= sets_ || way >= ways_) throw Error(Errc::InvalidValue, "way outside cache");
    if (is_reserved(set, way)) {
      throw Error(Errc::AlreadyReserved, "set " + std::to_string(set) + " way " + std::to_string(way));
    }
    reserved_[set] |= std::uint64_t{1} << way;
    ++reserved_total_;
    auto& l = at(set, way);
    std::optional<Eviction> ev;
    if (l.valid) ev = Eviction{(l.tag << set_bits_) | set, l.dirty};
    l = CacheLineState{};
    return ev;
  }

  /// Returns every reserved way to demand use. Tracking contents are
  /// dropped, so the released ways come back invalid.
  void release_all() {
    for (std::uint32_t s = 0; s < sets_; ++s) {
      if (reserved_[s] == 0) continue;
      for (std::uint32_t w = 0; w < ways_; ++w) {
        if (is_reserved(s, w)) at(s, w) = CacheLineState{};
      }
      reserved_[s] = 0;
    }
    reserved_total_ = 0;
  }

  bool is_reserved(std::uint32_t set, std::uint32_t way) const noexcept { return (reserved_[set] >> way) & 1u; }
  unsigned reserved_count(std::uint32_t set) const { return static_cast<unsigned>(std::popcount(reserved_.at(set))); }
  std::uint64_t reserved_total() const noexcept { return reserved_total_; }
  const CacheLineState& line(std::uint32_t set, std::uint32_t way) const { return lines_.at(std::size_t{set} * ways_ + way); }

  /// True when no reserved way holds demand data.
  bool reservation_invariant_holds() const {
    for (std::uint32_t s = 0; s < sets_; ++s) {
      for (std::uint32_t w = 0; w < ways_; ++w) {
        if (is_reserved(s, w) && at(s, w).valid) return false;
      }
    }
    return true;
  }

 private:
  CacheLineState& at(std::uint32_t set, std::uint32_t way) { return lines_[std::size_t{set} * ways_ + way]; }
  const CacheLineState& at(std::uint32_t set, std::uint32_t way) const { return lines_[std::size_t{set} * ways_ + way]; }

  std::optional<std::uint32_t> choose_victim(std::uint32_t set) {
    bool any = false;
    for (std::uint32_t w = 0; w < ways_; ++w) {
      if (is_reserved(set, w)) continue;
      any = true;
      if (!at(set, w).valid) return w;
    }
    if (!any) return std::nullopt;
    if (policy_ == Replacement::lru) {
      std::optional<std::uint32_t> best;
      for (std::uint32_t w = 0; w < ways_; ++w) {
        if (is_reserved(set, w)) continue;
        if (!best || at(set, w).stamp < at(set, *best).stamp) best = w;
      }
      return best;
    }
    for (;;) {
      for (std::uint32_t w = 0; w < ways_; ++w) {
        if (!is_reserved(set, w) && at(set, w).rrpv >= kMaxRrpv) return w;
      }
      for (std::uint32_t w = 0; w < ways_; ++w) {
        if (!is_reserved(set, w)) ++at(set, w).rrpv;
      }
    }
  }

  std::uint32_t sets_;
  std::uint32_t ways_;
  unsigned set_bits_;
  Replacement policy_;
  std::vector<CacheLineState> lines_;
  std::vector<std::uint64_t> reserved_;
  std::uint64_t reserved_total_ = 0;
  std::uint64_t clock_ = 0;
};

/// Open-row (or close-row) state of every bank.
class BankModel {
 public:
  BankModel(std::uint32_t banks, PagePolicy policy) : open_(banks), policy_(policy) {}

  /// True when touching `row` in `bank` needs an activation.
  bool touch(std::uint32_t bank, std::uint64_t row) {
    if (policy_ == PagePolicy::close_row) return true;
    auto& o = open_.at(bank);
    if (o && *o == row) return false;
    o = row;
    return true;
  }

  std::optional<std::uint64_t> open_row(std::uint32_t bank) const { return open_.at(bank); }

 private:
  std::vector<std::optional<std::uint64_t>> open_;
  PagePolicy policy_;
};

struct FrontendStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bypasses = 0;
  std::uint64_t writebacks = 0;
  std::uint64_t forced_evictions = 0;
  std::uint64_t forced_writebacks = 0;
  std::uint64_t activations = 0;
};

struct AccessOutcome {
  bool hit = false;
  std::optional<ActivationEvent> activation;
  std::optional<Eviction> eviction;
  std::optional<ActivationEvent> writeback_activation;
};

/// Lets a tracker lease ways without knowing how the cache is modeled.
class ReservationPort {
 public:
  virtual ~ReservationPort() = default;
  virtual std::optional<Eviction> reserve_way(std::uint32_t set, std::uint32_t way) = 0;
  virtual void release_all_reservations() = 0;
};

struct FrontendOptions {
  Replacement replacement = Replacement::srrip;
  bool count_writeback_acts = false;
  // Every access becomes an activation (uncached, clflush-style traffic);
  // the cache still records reservations.
  bool direct = false;
};

/// LLC + row buffers: turns memory accesses into demand activations.
class MemoryFrontend : public ReservationPort {
 public:
  MemoryFrontend(const Geometry& geo, FrontendOptions opts = {})
      : geo_(&geo),
        opts_(opts),
        cache_(geo.sets(), geo.ways(), opts.replacement),
        banks_(geo.config().bank_count, geo.config().page_policy) {}

  AccessOutcome access(const MemoryAccess& a) {
    const AddressMapping m = geo_->map_address(a.addr);
    AccessOutcome out;
    if (opts_.direct) {
      ++stats_.misses;
      ++stats_.activations;
      out.activation = ActivationEvent{a.time_ns, m.row_id, Cause::demand};
      return out;
    }
    const LookupResult r = cache_.access(m.line_addr, a.kind == AccessKind::write);
    out.hit = r.hit;
    if (r.hit) {
      ++stats_.hits;
      return out;
    }
    ++stats_.misses;
    if (r.bypass) ++stats_.bypasses;
    out.eviction = r.eviction;
    if (r.eviction && r.eviction->dirty) {
      ++stats_.writebacks;
      if (opts_.count_writeback_acts) {
        const std::uint64_t row = geo_->map_address(r.eviction->line_addr << geo_->layout().line_bits).row_id;
        if (banks_.touch(geo_->bank_of(row), row)) {
          ++stats_.activations;
          out.writeback_activation = ActivationEvent{a.time_ns, row, Cause::demand};
        }
      }
    }
    if (banks_.touch(m.bank, m.row_id)) {
      ++stats_.activations;
      out.activation = ActivationEvent{a.time_ns, m.row_id, Cause::demand};
    }
    return out;
  }

  /// Fills the cache without counting anything or touching row buffers.
  void warm(const MemoryAccess& a) {
    if (opts_.direct) return;
    cache_.access(geo_->map_address(a.addr).line_addr, a.kind == AccessKind::write);
  }

  std::optional<Eviction> reserve_way(std::uint32_t set, std::uint32_t way) override {
    auto ev = cache_.reserve(set, way);
    if (ev) {
      ++stats_.forced_evictions;
      if (ev->dirty) ++stats_.forced_writebacks;
    }
    return ev;
  }

  void release_all_reservations() override { cache_.release_all(); }

  const SetAssocCache& cache() const noexcept { return cache_; }
  const FrontendStats& stats() const noexcept { return stats_; }
  const FrontendOptions& options() const noexcept { return opts_; }

  /// Fraction of LLC ways currently leased to tracking.
  double reserved_fraction() const noexcept {
    return static_cast<double>(cache_.reserved_total()) / (static_cast<double>(cache_.sets()) * cache_.ways());
  }

 private:
  const Geometry* geo_;
  FrontendOptions opts_;
  SetAssocCache cache_;
  BankModel banks_;
  FrontendStats stats_;
};

}  // namespace rowtrack
