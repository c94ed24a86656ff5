#include "malclass/asmparse.hpp"

namespace malclass {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

bool is_hex(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F'); }

bool is_byte_column_digit(char c) { return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'F'); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// IDA prints the byte column in upper case while mnemonics are lower case,
// which keeps `db`/`dd` from being mistaken for bytes.
bool is_byte_token(std::string_view tok) {
  if (tok.size() == 3 && tok[2] == '+') tok.remove_suffix(1);
  return tok.size() == 2 && is_byte_column_digit(tok[0]) && is_byte_column_digit(tok[1]);
}

// Position of the first `;` outside quotes, or npos.
std::size_t comment_start(std::string_view s) {
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == ';') {
      return i;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::vector<std::string> split_operands(std::string_view field) {
  std::vector<std::string> out;
  field = trim(field);
  if (field.empty()) return out;
  int depth = 0;
  char quote = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const char c = field[i];
    if (quote) {
      if (c == quote) quote = 0;
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '(' || c == '[') {
      ++depth;
    } else if ((c == ')' || c == ']') && depth > 0) {
      --depth;
    } else if (c == ',' && depth == 0) {
      auto piece = trim(field.substr(start, i - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 1;
    }
  }
  auto piece = trim(field.substr(start));
  if (!piece.empty()) out.emplace_back(piece);
  return out;
}

std::optional<AsmLine> parse_asm_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const std::size_t colon = line.find(':');
  if (colon == 0 || colon == std::string_view::npos) return std::nullopt;
  const std::string_view section = line.substr(0, colon);
  for (char c : section)
    if (is_space(c)) return std::nullopt;

  std::size_t i = colon + 1;
  std::uint64_t address = 0;
  const std::size_t addr_start = i;
  while (i < line.size() && is_hex(line[i])) {
    const char c = line[i];
    const int v = c <= '9' ? c - '0' : (c | 0x20) - 'a' + 10;
    address = (address << 4) | static_cast<std::uint64_t>(v);
    ++i;
  }
  if (i == addr_start || i - addr_start > 16) return std::nullopt;
  if (i < line.size() && !is_space(line[i])) return std::nullopt;

  // Skip the byte column.
  for (;;) {
    std::size_t j = i;
    while (j < line.size() && is_space(line[j])) ++j;
    std::size_t k = j;
    while (k < line.size() && !is_space(line[k])) ++k;
    if (j == k || !is_byte_token(line.substr(j, k - j))) {
      i = j;
      break;
    }
    i = k;
  }

  AsmLine out;
  out.section = std::string(section);
  out.address = address;
  out.raw = std::string(line);

  std::string_view field = line.substr(i);
  if (const auto semi = comment_start(field); semi != std::string_view::npos) field = field.substr(0, semi);
  field = trim(field);
  if (field.empty()) return out;

  std::size_t m = 0;
  while (m < field.size() && !is_space(field[m])) ++m;
  out.mnemonic = std::string(field.substr(0, m));
  out.operands = split_operands(field.substr(m));
  return out;
}

AsmListing parse_asm(std::string_view text) {
  AsmListing listing;
  listing.file_size_bytes = text.size();
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++listing.line_count;
    if (auto parsed = parse_asm_line(text.substr(pos, end - pos))) {
      ++listing.section_line_counts[parsed->section];
      listing.lines.push_back(std::move(*parsed));
    }
    pos = end + 1;
  }
  return listing;
}

}  // namespace malclass
