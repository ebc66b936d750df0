#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "rowtrack/config.hpp"
#include "rowtrack/error.hpp"
#include "rowtrack/sac.hpp"

namespace rowtrack {

/// Bit-level layout derived from a validated (geometry, tracker) pair.
struct DerivedLayout {
  unsigned row_bits = 0;
  unsigned set_bits = 0;
  unsigned tag_bits = 0;
  std::uint64_t rows_per_set = 0;
  unsigned counter_bits = 0;
  std::uint32_t effective_threshold = 0;
  // Tagged entries carry an explicit valid bit only when it fits in the
  // byte-rounded tag+counter width; otherwise a zero counter means "free".
  bool valid_bit = true;
  unsigned tagged_entry_bytes = 0;
  unsigned entries_per_line = 0;
  bool untagged_feasible = false;

  unsigned line_bits = 0;
  unsigned bank_bits = 0;
  unsigned column_bits = 0;
  std::uint64_t rows_per_bank = 0;
  std::uint64_t lines_per_row = 0;
};

struct RowMapping {
  std::uint32_t set_index = 0;
  std::uint32_t row_tag = 0;
  std::uint32_t untagged_way = 0;
  std::uint32_t untagged_byte = 0;
};

struct AddressMapping {
  std::uint32_t bank = 0;
  std::uint64_t row_id = 0;
  std::uint64_t column = 0;
  std::uint32_t llc_set = 0;
  std::uint64_t llc_tag = 0;
  std::uint64_t line_addr = 0;
};

/// Where the memory-mapped tracking table lives: the top rows of memory,
/// one densely packed counter per row (its own rows included).
struct MttRegion {
  std::uint64_t base_row = 0;
  std::uint64_t rows = 0;
  unsigned counter_bytes = 0;
};

namespace detail {
inline bool is_pow2(std::uint64_t v) { return v != 0 && std::has_single_bit(v); }
inline unsigned log2u(std::uint64_t v) { return static_cast<unsigned>(std::bit_width(v) - 1); }
}  // namespace detail

/// Checks every constraint and returns the derived layout, or throws
/// ConfigError listing all violations.
inline DerivedLayout validate(const GeometryConfig& g, const TrackerConfig& t) {
  std::vector<Violation> bad;
  auto fail = [&](Errc c, std::string msg) { bad.push_back({c, std::move(msg)}); };

  auto pow2 = [&](std::uint64_t v, const char* name) {
    if (!detail::is_pow2(v)) fail(Errc::NonPowerOfTwo, std::string(name) + " = " + std::to_string(v));
  };
  pow2(g.row_count, "row_count");
  pow2(g.bank_count, "bank_count");
  pow2(g.llc_sets, "llc_sets");
  pow2(g.line_bytes, "line_bytes");
  pow2(g.row_size_bytes, "row_size_bytes");

  if (g.llc_ways == 0 || g.llc_ways > 64) fail(Errc::InvalidValue, "llc_ways must be in [1, 64]");
  if (g.trc_ns == 0) fail(Errc::InvalidValue, "trc_ns must be positive");
  if (g.window_ns < g.trc_ns) fail(Errc::InvalidValue, "window_ns must be at least trc_ns");
  if (!(g.refresh_overhead >= 0.0 && g.refresh_overhead < 1.0)) fail(Errc::InvalidValue, "refresh_overhead must be in [0, 1)");
  if (t.t_rh < 2) fail(Errc::InvalidValue, "t_rh must be at least 2");
  if (t.blast_radius < 1 || t.blast_radius > 4) fail(Errc::InvalidValue, "blast_radius must be in [1, 4]");
  // More refreshes per mitigation than the threshold it clears: cascades never settle.
  else if (t.t_rh >= 2 && 2 * t.blast_radius > t.t_rh / 2)
    fail(Errc::InvalidValue, "2 x blast_radius must not exceed t_rh / 2");
  if (!bad.empty()) throw ConfigError(std::move(bad));

  DerivedLayout L;
  L.row_bits = detail::log2u(g.row_count);
  L.set_bits = detail::log2u(g.llc_sets);
  L.line_bits = detail::log2u(g.line_bytes);
  L.bank_bits = detail::log2u(g.bank_count);

  if (L.row_bits < L.set_bits) fail(Errc::InvalidValue, "row_count must be >= llc_sets");
  if (g.bank_count > g.row_count) fail(Errc::InvalidValue, "bank_count must be <= row_count");
  if (g.row_size_bytes < g.line_bytes) fail(Errc::InvalidValue, "row_size_bytes must be >= line_bytes");
  if (!bad.empty()) throw ConfigError(std::move(bad));

  L.tag_bits = L.row_bits - L.set_bits;
  L.rows_per_set = std::uint64_t{1} << L.tag_bits;
  L.rows_per_bank = g.row_count / g.bank_count;
  L.lines_per_row = g.row_size_bytes / g.line_bytes;
  L.column_bits = detail::log2u(L.lines_per_row);
  L.effective_threshold = t.effective_threshold();
  L.counter_bits = t.resolved_counter_bits();

  if (L.counter_bits > 32) fail(Errc::InvalidValue, "counter_bits must be <= 32");
  if (L.counter_bits < 32 && (std::uint64_t{1} << L.counter_bits) < L.effective_threshold) {
    fail(Errc::CounterTooNarrow, std::to_string(L.counter_bits) + "-bit counter cannot hold effective threshold " +
                                     std::to_string(L.effective_threshold) + " - 1");
  }

  const unsigned payload = L.tag_bits + L.counter_bits;
  const unsigned bytes = (payload + 7) / 8;
  L.valid_bit = payload + 1 <= bytes * 8;
  L.tagged_entry_bytes = bytes == 0 ? 1 : bytes;
  L.entries_per_line = g.line_bytes / L.tagged_entry_bytes;
  L.untagged_feasible = L.rows_per_set <= 8ull * g.line_bytes;

  if (t.variant != Variant::ideal) {
    const SacState cap = t.max_state();
    if (g.llc_ways < reserved_ways(t.variant == Variant::start_s ? SacState::s3 : cap)) {
      fail(Errc::WaysInsufficient, "llc_ways = " + std::to_string(g.llc_ways) + " cannot host the terminal allocation");
    }
    if (L.entries_per_line == 0) fail(Errc::InvalidValue, "tagged entry wider than a line");
    const bool eight_way = t.variant == Variant::start_s || cap == SacState::s3;
    if (eight_way && L.tag_bits < 3) fail(Errc::TagTooNarrow, "8-way allocation needs at least 3 tag bits");
    if (cap >= SacState::s2 && L.tag_bits < 1) fail(Errc::TagTooNarrow, "2-way allocation needs at least 1 tag bit");
    if (t.terminal_untagged()) {
      if (!L.untagged_feasible) {
        fail(Errc::UntaggedModeInfeasible, std::to_string(L.rows_per_set) + " rows per set exceed 8 lines of 1-byte counters");
      }
      if (L.counter_bits > 8 || L.effective_threshold > 256) {
        fail(Errc::UntaggedModeInfeasible, "untagged terminal format stores 8-bit counters");
      }
      if (t.max_state_override && *t.max_state_override != SacState::s3) {
        fail(Errc::InvalidValue, "trackers without a memory-mapped table must be allowed to reach s3");
      }
    }
    if (t.has_mtt()) {
      const unsigned cbytes = (L.counter_bits + 7) / 8;
      const std::uint64_t mtt_rows = (g.row_count * cbytes + g.row_size_bytes - 1) / g.row_size_bytes;
      if (mtt_rows > L.rows_per_bank) fail(Errc::InvalidValue, "tracking table does not fit in the last bank");
    }
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return L;
}

/// Immutable, validated address-mapping context shared by every module.
class Geometry {
 public:
  explicit Geometry(GeometryConfig config, TrackerConfig tracker = {})
      : config_(config), tracker_(tracker), layout_(validate(config_, tracker_)) {}

  const GeometryConfig& config() const noexcept { return config_; }
  const TrackerConfig& tracker() const noexcept { return tracker_; }
  const DerivedLayout& layout() const noexcept { return layout_; }

  std::uint64_t row_count() const noexcept { return config_.row_count; }
  std::uint32_t sets() const noexcept { return config_.llc_sets; }
  std::uint32_t ways() const noexcept { return config_.llc_ways; }
  std::uint64_t memory_bytes() const noexcept { return config_.row_count * config_.row_size_bytes; }

  RowMapping map_row(std::uint64_t row_id) const {
    if (row_id >= config_.row_count) {
      throw Error(Errc::RowOutOfRange, "row " + std::to_string(row_id) + " >= " + std::to_string(config_.row_count));
    }
    const std::uint64_t tag_mask = layout_.rows_per_set - 1;
    RowMapping m;
    m.row_tag = static_cast<std::uint32_t>(row_id & tag_mask);
    m.set_index = static_cast<std::uint32_t>(row_id >> layout_.tag_bits);
    if (config_.set_hash) m.set_index ^= fold(m.row_tag);
    const unsigned shift = layout_.tag_bits >= 3 ? layout_.tag_bits - 3 : 0;
    m.untagged_way = m.row_tag >> shift;
    m.untagged_byte = m.row_tag & ((1u << shift) - 1);
    return m;
  }

  /// Inverse of map_row.
  std::uint64_t row_of(std::uint32_t set, std::uint32_t tag) const {
    std::uint32_t s = set;
    if (config_.set_hash) s ^= fold(tag);
    return (std::uint64_t{s} << layout_.tag_bits) | tag;
  }

  std::uint64_t row_of_untagged(std::uint32_t set, std::uint32_t way, std::uint32_t byte) const {
    const unsigned shift = layout_.tag_bits >= 3 ? layout_.tag_bits - 3 : 0;
    return row_of(set, (way << shift) | byte);
  }

  /// Line-interleaved banks: [offset | bank | column | in-bank row].
  AddressMapping map_address(std::uint64_t addr) const {
    if (addr >= memory_bytes()) {
      throw Error(Errc::AddressOutOfRange, "address " + std::to_string(addr) + " beyond memory");
    }
    AddressMapping a;
    a.line_addr = addr >> layout_.line_bits;
    a.bank = static_cast<std::uint32_t>(a.line_addr & (config_.bank_count - 1));
    const std::uint64_t rest = a.line_addr >> layout_.bank_bits;
    a.column = rest & (layout_.lines_per_row - 1);
    const std::uint64_t in_bank = rest >> layout_.column_bits;
    a.row_id = std::uint64_t{a.bank} * layout_.rows_per_bank + in_bank;
    a.llc_set = static_cast<std::uint32_t>(a.line_addr & (config_.llc_sets - 1));
    a.llc_tag = a.line_addr >> layout_.set_bits;
    return a;
  }

  std::uint64_t row_address(std::uint64_t row_id, std::uint64_t column = 0) const {
    if (row_id >= config_.row_count) throw Error(Errc::RowOutOfRange, "row " + std::to_string(row_id));
    const std::uint64_t bank = row_id / layout_.rows_per_bank;
    const std::uint64_t in_bank = row_id % layout_.rows_per_bank;
    const std::uint64_t col = column & (layout_.lines_per_row - 1);
    const std::uint64_t line = (((in_bank << layout_.column_bits) | col) << layout_.bank_bits) | bank;
    return line << layout_.line_bits;
  }

  std::uint32_t bank_of(std::uint64_t row_id) const noexcept {
    return static_cast<std::uint32_t>(row_id / layout_.rows_per_bank);
  }

  /// Activations one bank can sustain in a window: floor(window / tRC),
  /// optionally discounting the time spent refreshing.
  std::uint64_t act_max_per_window(bool refresh_discount) const noexcept {
    const double usable = static_cast<double>(config_.window_ns) * (refresh_discount ? 1.0 - config_.refresh_overhead : 1.0);
    return static_cast<std::uint64_t>(usable / static_cast<double>(config_.trc_ns));
  }

  MttRegion mtt_region() const noexcept {
    MttRegion r;
    r.counter_bytes = (layout_.counter_bits + 7) / 8;
    r.rows = (config_.row_count * r.counter_bytes + config_.row_size_bytes - 1) / config_.row_size_bytes;
    r.base_row = config_.row_count - r.rows;
    return r;
  }

  /// Bytes a bit-packed table of counter_bits per row would need. For the
  /// 512GB system at 11 bits this is 88 MiB (the simulator itself lays the
  /// table out byte-aligned, see mtt_region()).
  std::uint64_t mtt_packed_bytes() const noexcept { return (config_.row_count * layout_.counter_bits + 7) / 8; }

  /// Tagged entries held when every set has all 8 ways leased.
  std::uint64_t eight_way_entry_capacity() const noexcept {
    return std::uint64_t{config_.llc_sets} * 8 * layout_.entries_per_line;
  }

 private:
  std::uint32_t fold(std::uint32_t tag) const noexcept { return tag & (config_.llc_sets - 1); }

  GeometryConfig config_;
  TrackerConfig tracker_;
  DerivedLayout layout_;
};

}  // namespace rowtrack
