#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "rowtrack/line_codec.hpp"

using namespace rowtrack;

namespace {

DerivedLayout layout_for(GeometryConfig g, std::uint32_t t_rh, std::uint32_t bits, Variant v = Variant::start_m) {
  TrackerConfig t;
  t.variant = v;
  t.t_rh = t_rh;
  t.counter_bits = bits;
  return validate(g, t);
}

}  // namespace

TEST(TaggedCodec, NineBitTagSevenBitCounterPacksSixteenBits) {
  const auto L = layout_for(table1_geometry(), 256, 7, Variant::start_d);
  TaggedLineCodec c(L, 64);
  EXPECT_EQ(c.slots(), 32u);
  EXPECT_FALSE(c.explicit_valid());
  std::vector<std::uint8_t> line(64, 0);
  c.encode(line, 3, {true, 0b101000011, 9});
  // little endian: counter in bits 0..6, tag in bits 7..15
  const std::uint16_t raw = static_cast<std::uint16_t>(line[6] | (line[7] << 8));
  EXPECT_EQ(raw & 0x7F, 9);
  EXPECT_EQ(raw >> 7, 0b101000011);
  EXPECT_EQ(c.decode(line, 3), (TrackingEntry{true, 0b101000011, 9}));
  EXPECT_FALSE(c.decode(line, 2).valid);
}

TEST(TaggedCodec, ImplicitValidityCannotHoldZeroCount) {
  const auto L = layout_for(table1_geometry(), 256, 7, Variant::start_d);
  TaggedLineCodec c(L, 64);
  std::vector<std::uint8_t> line(64, 0);
  EXPECT_THROW(c.encode(line, 0, {true, 5, 0}), Error);
}

TEST(TaggedCodec, ExplicitValidBitKeepsZeroCountEntries) {
  const auto L = layout_for(large_memory_geometry(), 4096, 11);
  TaggedLineCodec c(L, 64);
  EXPECT_TRUE(c.explicit_valid());
  EXPECT_EQ(c.slots(), 21u);
  std::vector<std::uint8_t> line(64, 0);
  c.encode(line, 20, {true, 4095, 0});
  EXPECT_EQ(c.decode(line, 20), (TrackingEntry{true, 4095, 0}));
  // the 64th byte is padding and stays untouched
  EXPECT_EQ(line[63], 0);
}

TEST(TaggedCodec, RoundTripRandomEntries) {
  std::mt19937_64 rng(11);
  for (auto [rows, sets, trh] : std::vector<std::tuple<std::uint64_t, std::uint32_t, std::uint32_t>>{
           {32768, 64, 16}, {32768, 64, 256}, {262144, 1024, 64}, {65536, 128, 4096}}) {
    GeometryConfig g;
    g.row_count = rows;
    g.llc_sets = sets;
    const auto L = layout_for(g, trh, 0);
    TaggedLineCodec c(L, 64);
    std::vector<std::uint8_t> line(64, 0);
    std::vector<TrackingEntry> model(c.slots());
    std::uniform_int_distribution<std::uint32_t> tag(0, (1u << L.tag_bits) - 1);
    std::uniform_int_distribution<std::uint32_t> cnt(0, L.effective_threshold - 1);
    std::uniform_int_distribution<unsigned> slot(0, c.slots() - 1);
    for (int i = 0; i < 5000; ++i) {
      const unsigned s = slot(rng);
      TrackingEntry e{rng() % 4 != 0, tag(rng), cnt(rng)};
      if (!e.valid) e = {};
      if (e.valid && e.counter == 0 && !c.explicit_valid()) e.counter = 1;
      c.encode(line, s, e);
      model[s] = e;
      for (unsigned k = 0; k < c.slots(); ++k) ASSERT_EQ(c.decode(line, k), model[k]) << "slot " << k;
    }
  }
}

TEST(UntaggedCodec, OneBytePerRow) {
  std::vector<std::uint8_t> line(64, 0);
  UntaggedLineCodec::encode(line, 3, 9);
  UntaggedLineCodec::encode(line, 63, 255);
  EXPECT_EQ(UntaggedLineCodec::decode(line, 3), 9u);
  EXPECT_EQ(UntaggedLineCodec::decode(line, 63), 255u);
  EXPECT_EQ(UntaggedLineCodec::decode(line, 4), 0u);
  EXPECT_THROW(UntaggedLineCodec::encode(line, 0, 256), Error);
}
