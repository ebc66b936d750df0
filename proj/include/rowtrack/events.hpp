#pragma once

#include <cstdint>
#include <string_view>

namespace rowtrack {

enum class AccessKind : std::uint8_t { read, write };

struct MemoryAccess {
  std::uint64_t time_ns = 0;
  std::uint64_t addr = 0;
  AccessKind kind = AccessKind::read;

  friend bool operator==(const MemoryAccess&, const MemoryAccess&) = default;
};

enum class Cause : std::uint8_t { demand, victim_refresh, metadata };

constexpr std::string_view to_string(Cause c) {
  switch (c) {
    case Cause::demand: return "demand";
    case Cause::victim_refresh: return "victim_refresh";
    case Cause::metadata: return "metadata";
  }
  return "?";
}

constexpr char cause_letter(Cause c) {
  return c == Cause::demand ? 'D' : c == Cause::victim_refresh ? 'V' : 'M';
}

struct ActivationEvent {
  std::uint64_t time_ns = 0;
  std::uint64_t row_id = 0;
  Cause cause = Cause::demand;

  friend bool operator==(const ActivationEvent&, const ActivationEvent&) = default;
};

}  // namespace rowtrack
