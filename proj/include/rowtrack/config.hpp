#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rowtrack/error.hpp"
#include "rowtrack/sac.hpp"

namespace rowtrack {

enum class PagePolicy : std::uint8_t { open_row, close_row };

/// DRAM + LLC description. Defaults are a desk-scale configuration; the
/// baseline system is available via table1_geometry().
struct GeometryConfig {
  std::uint64_t row_count = 32768;
  std::uint64_t row_size_bytes = 8192;
  std::uint32_t bank_count = 16;
  std::uint32_t line_bytes = 64;
  std::uint32_t llc_sets = 64;
  std::uint32_t llc_ways = 16;
  std::uint64_t trc_ns = 45;
  std::uint64_t window_ns = 64'000'000;
  PagePolicy page_policy = PagePolicy::open_row;
  bool set_hash = false;
  double refresh_overhead = 0.044;
};

/// 64GB DDR5, 128 banks, 8KB rows, 16MB 16-way LLC with 64B lines.
inline GeometryConfig table1_geometry() {
  GeometryConfig g;
  g.row_count = 8ull << 20;
  g.row_size_bytes = 8192;
  g.bank_count = 128;
  g.line_bytes = 64;
  g.llc_sets = 16384;
  g.llc_ways = 16;
  return g;
}

/// The large-memory system used for the memory-mapped tracker: 512GB, same LLC.
inline GeometryConfig large_memory_geometry() {
  GeometryConfig g = table1_geometry();
  g.row_count = 64ull << 20;
  g.bank_count = 1024;
  return g;
}

enum class Variant : std::uint8_t { start_s, start_d, start_m, start_lite, ideal };
enum class MttResetMode : std::uint8_t { bulk, per_line };

struct TrackerConfig {
  Variant variant = Variant::start_d;
  std::uint32_t t_rh = 256;
  // 0 selects the narrowest width able to hold effective_threshold() - 1.
  std::uint32_t counter_bits = 0;
  std::uint32_t blast_radius = 1;
  bool free_on_mitigate = false;
  MttResetMode mtt_reset = MttResetMode::bulk;
  std::optional<SacState> max_state_override;

  std::uint32_t effective_threshold() const noexcept { return t_rh / 2; }

  bool has_mtt() const noexcept { return variant == Variant::start_m || variant == Variant::start_lite; }

  bool terminal_untagged() const noexcept { return variant == Variant::start_s || variant == Variant::start_d; }

  SacState max_state() const noexcept {
    if (max_state_override) return *max_state_override;
    return variant == Variant::start_lite ? SacState::s1 : SacState::s3;
  }

  std::uint32_t resolved_counter_bits() const noexcept {
    if (counter_bits != 0) return counter_bits;
    std::uint32_t bits = 1;
    while ((std::uint64_t{1} << bits) < effective_threshold()) ++bits;
    return bits;
  }
};

constexpr std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::start_s: return "start-s";
    case Variant::start_d: return "start-d";
    case Variant::start_m: return "start-m";
    case Variant::start_lite: return "start-lite";
    case Variant::ideal: return "ideal";
  }
  return "?";
}

constexpr std::string_view to_string(PagePolicy p) { return p == PagePolicy::open_row ? "open-row" : "close-row"; }

constexpr std::string_view to_string(MttResetMode m) { return m == MttResetMode::bulk ? "bulk" : "per-line"; }

namespace detail {
inline std::string normalize_name(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c == '_') c = '-';
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}
}  // namespace detail

inline Variant parse_variant(std::string_view s) {
  const auto n = detail::normalize_name(s);
  for (auto v : {Variant::start_s, Variant::start_d, Variant::start_m, Variant::start_lite, Variant::ideal}) {
    if (n == to_string(v)) return v;
  }
  throw Error(Errc::InvalidValue, "unknown variant '" + std::string(s) + "'");
}

inline PagePolicy parse_page_policy(std::string_view s) {
  const auto n = detail::normalize_name(s);
  if (n == "open-row" || n == "open") return PagePolicy::open_row;
  if (n == "close-row" || n == "close" || n == "closed-row") return PagePolicy::close_row;
  throw Error(Errc::InvalidValue, "unknown page policy '" + std::string(s) + "'");
}

inline MttResetMode parse_mtt_reset(std::string_view s) {
  const auto n = detail::normalize_name(s);
  if (n == "bulk") return MttResetMode::bulk;
  if (n == "per-line") return MttResetMode::per_line;
  throw Error(Errc::InvalidValue, "unknown mtt reset mode '" + std::string(s) + "'");
}

}  // namespace rowtrack
