#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rowtrack/error.hpp"

namespace rowtrack {

/// Set Allocation Counter value. Encoded in 2 bits per LLC set.
enum class SacState : std::uint8_t { s0 = 0, s1 = 1, s2 = 2, s3 = 3 };

/// Ways leased to tracking in each state: 0, 1, 2, 8.
constexpr unsigned reserved_ways(SacState s) {
  constexpr std::array<unsigned, 4> ways{0, 1, 2, 8};
  return ways[static_cast<unsigned>(s)];
}

/// Fixed reservation order: way 0 first, then 1, then 2..7.
inline constexpr std::array<unsigned, 8> kReservationOrder{0, 1, 2, 3, 4, 5, 6, 7};

class SacTable {
 public:
  struct Escalation {
    SacState state;
    std::vector<unsigned> ways_added;
  };

  explicit SacTable(std::uint32_t sets, SacState max_state = SacState::s3)
      : sets_(sets), max_state_(max_state), bits_((sets + 3) / 4, 0) {}

  std::uint32_t sets() const noexcept { return sets_; }
  SacState max_state() const noexcept { return max_state_; }

  SacState get(std::uint32_t set) const {
    check(set);
    return static_cast<SacState>((bits_[set / 4] >> shift(set)) & 0x3u);
  }

  bool can_escalate(std::uint32_t set) const { return get(set) < max_state_; }

  /// Moves `set` one step along s0 -> s1 -> s2 -> s3 and reports which
  /// way indices became reserved.
  Escalation escalate(std::uint32_t set) {
    const SacState cur = get(set);
    if (cur == SacState::s3) throw Error(Errc::AlreadyMax, "set " + std::to_string(set) + " already at s3");
    if (cur >= max_state_) throw Error(Errc::AtCap, "set " + std::to_string(set) + " at configured cap");
    const auto next = static_cast<SacState>(static_cast<unsigned>(cur) + 1);
    put(set, next);
    Escalation out{next, {}};
    for (unsigned i = reserved_ways(cur); i < reserved_ways(next); ++i) out.ways_added.push_back(kReservationOrder[i]);
    return out;
  }

  void reset_all() { std::fill(bits_.begin(), bits_.end(), std::uint8_t{0}); }

  /// Bytes of SRAM the packed table occupies (2 bits per set).
  std::size_t storage_bytes() const noexcept { return bits_.size(); }

  std::array<std::uint64_t, 4> histogram() const {
    std::array<std::uint64_t, 4> h{};
    for (std::uint32_t s = 0; s < sets_; ++s) ++h[static_cast<unsigned>(get(s))];
    return h;
  }

  std::uint64_t total_reserved_ways() const {
    std::uint64_t n = 0;
    for (std::uint32_t s = 0; s < sets_; ++s) n += reserved_ways(get(s));
    return n;
  }

 private:
  static unsigned shift(std::uint32_t set) { return (set % 4) * 2; }

  void check(std::uint32_t set) const {
    if (set >= sets_) throw Error(Errc::InvalidValue, "set index " + std::to_string(set) + " out of range");
  }

  void put(std::uint32_t set, SacState s) {
    auto& byte = bits_[set / 4];
    byte = static_cast<std::uint8_t>((byte & ~(0x3u << shift(set))) | (static_cast<unsigned>(s) << shift(set)));
  }

  std::uint32_t sets_;
  SacState max_state_;
  std::vector<std::uint8_t> bits_;
};

}  // namespace rowtrack
