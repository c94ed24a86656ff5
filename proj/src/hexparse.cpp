#include "malclass/hexparse.hpp"

#include <charconv>

#include "malclass/errors.hpp"

namespace malclass {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

}  // namespace

std::vector<std::uint8_t> HexDump::usable_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(bytes.size());
  for (auto b : bytes)
    if (b != kMissingByte) out.push_back(static_cast<std::uint8_t>(b));
  return out;
}

HexDump parse_hexdump(std::string_view text) {
  HexDump dump;
  dump.file_size_bytes = text.size();
  dump.bytes.reserve(text.size() / 3);

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    for (char c : line) {
      if (static_cast<unsigned char>(c) >= 0x80 || (c < 0x20 && !is_space(c)))
        throw ParseError("non-ASCII or control character in hex dump", line_no);
    }

    std::size_t i = 0;
    auto next_token = [&]() -> std::string_view {
      while (i < line.size() && is_space(line[i])) ++i;
      const std::size_t start = i;
      while (i < line.size() && !is_space(line[i])) ++i;
      return line.substr(start, i - start);
    };

    std::string_view address = next_token();
    if (address.empty()) continue;  // blank line

    if (address.size() > 16) throw ParseError("address token too long", line_no);
    std::uint64_t addr_value = 0;
    for (char c : address) {
      const int v = hex_value(c);
      if (v < 0) throw ParseError("address is not hexadecimal: '" + std::string(address) + "'", line_no);
      addr_value = (addr_value << 4) | static_cast<std::uint64_t>(v);
    }
    if (dump.line_count == 0) dump.first_address = addr_value;
    ++dump.line_count;

    std::size_t count = 0;
    for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
      if (++count > 16) throw ParseError("more than 16 byte tokens", line_no);
      if (tok == "??") {
        dump.bytes.push_back(kMissingByte);
        continue;
      }
      const int hi = tok.size() == 2 ? hex_value(tok[0]) : -1;
      const int lo = tok.size() == 2 ? hex_value(tok[1]) : -1;
      if (hi < 0 || lo < 0) throw ParseError("malformed byte token '" + std::string(tok) + "'", line_no);
      dump.bytes.push_back(static_cast<std::uint16_t>(hi * 16 + lo));
    }
    if (count == 0) throw ParseError("address without byte tokens", line_no);
  }
  return dump;
}

std::string render_hexdump(std::uint64_t first_address, const std::vector<std::uint16_t>& bytes) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(bytes.size() * 3 + bytes.size() / 16 * 10 + 16);
  std::uint64_t address = first_address;
  for (std::size_t i = 0; i < bytes.size(); i += 16) {
    char buf[17];
    for (int d = 7; d >= 0; --d) buf[7 - d] = kDigits[(address >> (4 * d)) & 0xF];
    out.append(buf, 8);
    for (std::size_t j = i; j < bytes.size() && j < i + 16; ++j) {
      out.push_back(' ');
      if (bytes[j] == kMissingByte) {
        out += "??";
      } else {
        out.push_back(kDigits[bytes[j] >> 4]);
        out.push_back(kDigits[bytes[j] & 0xF]);
      }
    }
    out += "\r\n";
    address += 16;
  }
  return out;
}

}  // namespace malclass
