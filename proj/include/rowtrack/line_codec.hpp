#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "rowtrack/error.hpp"
#include "rowtrack/geometry.hpp"

namespace rowtrack {

struct TrackingEntry {
  bool valid = false;
  std::uint32_t tag = 0;
  std::uint32_t counter = 0;

  friend bool operator==(const TrackingEntry&, const TrackingEntry&) = default;
};

/// Bit-packs tagged entries into a cache line. Each entry occupies
/// `entry_bytes` little-endian bytes laid out as [counter | tag | valid].
/// When the layout has no room for an explicit valid bit, a zero counter
/// means the slot is free.
class TaggedLineCodec {
 public:
  TaggedLineCodec() = default;
  explicit TaggedLineCodec(const DerivedLayout& L, std::uint32_t line_bytes)
      : tag_bits_(L.tag_bits),
        counter_bits_(L.counter_bits),
        entry_bytes_(L.tagged_entry_bytes),
        slots_(L.entries_per_line),
        line_bytes_(line_bytes),
        explicit_valid_(L.valid_bit) {}

  unsigned slots() const noexcept { return slots_; }
  unsigned entry_bytes() const noexcept { return entry_bytes_; }
  bool explicit_valid() const noexcept { return explicit_valid_; }

  TrackingEntry decode(std::span<const std::uint8_t> line, unsigned slot) const {
    const std::uint64_t raw = load(line, slot);
    TrackingEntry e;
    e.counter = static_cast<std::uint32_t>(raw & mask(counter_bits_));
    e.tag = static_cast<std::uint32_t>((raw >> counter_bits_) & mask(tag_bits_));
    e.valid = explicit_valid_ ? ((raw >> (counter_bits_ + tag_bits_)) & 1u) != 0 : e.counter != 0;
    if (!e.valid) e = TrackingEntry{};
    return e;
  }

  void encode(std::span<std::uint8_t> line, unsigned slot, const TrackingEntry& e) const {
    std::uint64_t raw = 0;
    if (e.valid) {
      if (!explicit_valid_ && e.counter == 0) {
        throw Error(Errc::InvalidValue, "layout without a valid bit cannot hold a zero-count entry");
      }
      raw = (std::uint64_t{e.counter} & mask(counter_bits_)) |
            ((std::uint64_t{e.tag} & mask(tag_bits_)) << counter_bits_);
      if (explicit_valid_) raw |= std::uint64_t{1} << (counter_bits_ + tag_bits_);
    }
    store(line, slot, raw);
  }

 private:
  static std::uint64_t mask(unsigned bits) { return bits >= 64 ? ~0ull : (1ull << bits) - 1; }

  void check(std::size_t size, unsigned slot) const {
    if (slot >= slots_ || size < line_bytes_) throw Error(Errc::InvalidValue, "slot outside line");
  }

  std::uint64_t load(std::span<const std::uint8_t> line, unsigned slot) const {
    check(line.size(), slot);
    std::uint64_t raw = 0;
    const std::size_t base = std::size_t{slot} * entry_bytes_;
    for (unsigned b = 0; b < entry_bytes_; ++b) raw |= std::uint64_t{line[base + b]} << (8 * b);
    return raw;
  }

  void store(std::span<std::uint8_t> line, unsigned slot, std::uint64_t raw) const {
    check(line.size(), slot);
    const std::size_t base = std::size_t{slot} * entry_bytes_;
    for (unsigned b = 0; b < entry_bytes_; ++b) line[base + b] = static_cast<std::uint8_t>(raw >> (8 * b));
  }

  unsigned tag_bits_ = 0;
  unsigned counter_bits_ = 0;
  unsigned entry_bytes_ = 1;
  unsigned slots_ = 0;
  std::uint32_t line_bytes_ = 0;
  bool explicit_valid_ = true;
};

/// Untagged format: one byte counter per row; position encodes the row.
struct UntaggedLineCodec {
  static std::uint32_t decode(std::span<const std::uint8_t> line, unsigned byte) { return line[byte]; }
  static void encode(std::span<std::uint8_t> line, unsigned byte, std::uint32_t counter) {
    if (counter > 0xFF) throw Error(Errc::InvalidValue, "untagged counter exceeds one byte");
    line[byte] = static_cast<std::uint8_t>(counter);
  }
};

}  // namespace rowtrack
