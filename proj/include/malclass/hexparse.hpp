#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace malclass {

/// Byte value used for `??` tokens (no file mapping at that address).
inline constexpr std::uint16_t kMissingByte = 256;

/// Parsed `.bytes` hex view of one sample.
struct HexDump {
  std::uint64_t first_address = 0;
  /// Values 0..255, or kMissingByte.
  std::vector<std::uint16_t> bytes;
  std::uint64_t file_size_bytes = 0;
  std::uint64_t line_count = 0;

  /// The byte stream with `??` entries dropped.
  std::vector<std::uint8_t> usable_bytes() const;

  bool operator==(const HexDump&) const = default;
};

/// Parses the hex view: each non-blank line is an address token followed by
/// 1..16 byte tokens (two hex digits or `??`). Throws ParseError naming the
/// offending line.
HexDump parse_hexdump(std::string_view text);

/// Renders a dump in the same line layout (16 bytes per line, upper-case hex,
/// addresses advancing by 16 from first_address).
std::string render_hexdump(std::uint64_t first_address, const std::vector<std::uint16_t>& bytes);

}  // namespace malclass
