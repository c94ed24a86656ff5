#include <gtest/gtest.h>

#include <random>

#include "malclass/errors.hpp"
#include "malclass/hexparse.hpp"

using namespace malclass;

TEST(HexParse, SixteenByteLine) {
  const auto d = parse_hexdump("004010D0 8D 15 A8 80 63 00 BF 55 70 00 00 52 FF 72 7C 53\r\n");
  EXPECT_EQ(d.first_address, 0x4010D0u);
  ASSERT_EQ(d.bytes.size(), 16u);
  EXPECT_EQ(d.bytes[0], 0x8D);
  EXPECT_EQ(d.bytes[1], 0x15);
  EXPECT_EQ(d.bytes[15], 0x53);
  EXPECT_EQ(d.line_count, 1u);
}

TEST(HexParse, MissingMarkers) {
  const auto d = parse_hexdump("00401000 ?? ?? 41");
  EXPECT_EQ(d.bytes, (std::vector<std::uint16_t>{kMissingByte, kMissingByte, 0x41}));
  EXPECT_EQ(d.usable_bytes(), (std::vector<std::uint8_t>{0x41}));
}

TEST(HexParse, EmptyInput) {
  const auto d = parse_hexdump("");
  EXPECT_TRUE(d.bytes.empty());
  EXPECT_EQ(d.line_count, 0u);
  EXPECT_EQ(d.file_size_bytes, 0u);
}

TEST(HexParse, LowerCaseAndShortLines) {
  const auto d = parse_hexdump("0040aa00 ff 0a\n\n0040AA10 7f\n");
  EXPECT_EQ(d.first_address, 0x40AA00u);
  EXPECT_EQ(d.bytes, (std::vector<std::uint16_t>{0xFF, 0x0A, 0x7F}));
  EXPECT_EQ(d.line_count, 2u);
}

TEST(HexParse, AddressGapsAreAccepted) {
  const auto d = parse_hexdump("00000010 01\n00900000 02\n");
  EXPECT_EQ(d.first_address, 0x10u);
  EXPECT_EQ(d.bytes.size(), 2u);
}

TEST(HexParse, ErrorsNameTheLine) {
  auto line_of = [](std::string_view text) {
    try {
      parse_hexdump(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("00401000 AA\n00401010 GZ\n"), 2u);
  EXPECT_EQ(line_of("00401000 ABC\n"), 1u);
  EXPECT_EQ(line_of("00401000 A\n"), 1u);
  EXPECT_EQ(line_of("0040100X AA\n"), 1u);
  EXPECT_EQ(line_of("00401000 AA\n\n00401010 \xC3\xA9\n"), 3u);
  EXPECT_EQ(line_of("00401000 00 01 02 03 04 05 06 07 08 09 0A 0B 0C 0D 0E 0F 10\n"), 1u);
}

TEST(HexParse, BytesNeverExceedSixteenPerLine) {
  const auto d = parse_hexdump("00000000 01 02 03\n00000010 ?? 04\n");
  EXPECT_LE(d.bytes.size(), 16 * d.line_count);
}

TEST(HexParse, RenderRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint16_t> bytes(rng() % 100);
    for (auto& b : bytes) b = static_cast<std::uint16_t>(rng() % 257);
    const std::uint64_t addr = 0x400000 + (rng() % 0x1000) * 16;
    const auto text = render_hexdump(addr, bytes);
    const auto d = parse_hexdump(text);
    EXPECT_EQ(d.bytes, bytes);
    if (!bytes.empty()) EXPECT_EQ(d.first_address, addr);
    EXPECT_EQ(d.file_size_bytes, text.size());
  }
}

TEST(HexParse, TokenOrderIsPreserved) {
  const auto d = parse_hexdump("00000000 10 20\n00000002 30 ?? 40\n");
  EXPECT_EQ(d.bytes, (std::vector<std::uint16_t>{0x10, 0x20, 0x30, kMissingByte, 0x40}));
}
