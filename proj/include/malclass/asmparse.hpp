#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace malclass {

/// One `<section>:<address> [bytes] <mnemonic> <operands> [; comment]` line.
struct AsmLine {
  std::string section;
  std::uint64_t address = 0;
  std::optional<std::string> mnemonic;
  /// Comma-split at top level, trimmed, comment removed.
  std::vector<std::string> operands;
  std::string raw;

  bool operator==(const AsmLine&) const = default;
};

struct AsmListing {
  std::vector<AsmLine> lines;
  std::uint64_t file_size_bytes = 0;
  /// Every physical line, parsed or not.
  std::uint64_t line_count = 0;
  std::map<std::string, std::uint64_t> section_line_counts;

  bool operator==(const AsmListing&) const = default;
};

/// Best-effort parser for IDA-style listings. Lines without a
/// `section:hexaddress` prefix are counted but otherwise ignored.
AsmListing parse_asm(std::string_view text);

/// Parses a single line; nullopt when it has no `section:address` prefix.
std::optional<AsmLine> parse_asm_line(std::string_view line);

/// Splits an operand field on top-level commas (outside quotes, brackets and
/// parentheses), trimming each piece.
std::vector<std::string> split_operands(std::string_view field);

}  // namespace malclass
