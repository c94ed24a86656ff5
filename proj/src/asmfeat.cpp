#include "malclass/asmfeat.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <string>
#include <unordered_map>

#include "malclass/categories.hpp"

namespace malclass {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls fn(word) for every maximal run of [A-Za-z0-9_], lower-cased.
template <typename Fn>
void for_each_word(std::string_view text, std::string& buf, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_char(text[i])) ++i;
    if (i >= text.size()) break;
    buf.clear();
    while (i < text.size() && is_word_char(text[i]))
      buf.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i++]))));
    fn(buf);
  }
}

std::unordered_map<std::string, std::size_t> index_of(const std::vector<std::string>& words) {
  std::unordered_map<std::string, std::size_t> map;
  for (std::size_t i = 0; i < words.size(); ++i) map.emplace(words[i], i);
  return map;
}

int known_section_index(std::string_view section) {
  const std::string name = lower(section);
  for (std::size_t i = 0; i < kKnownSections.size(); ++i)
    if (kKnownSections[i] == name) return static_cast<int>(i);
  return -1;
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

bool is_dash_keyword(const std::string& word) {
  return !word.empty() && std::all_of(word.begin(), word.end(), [](char c) { return c == '-'; });
}

constexpr std::size_t kBorderDashes = 75;

}  // namespace

bool parse_numeric_literal(std::string_view token, unsigned long long& value) {
  if (token.empty() || !std::isdigit(static_cast<unsigned char>(token.front()))) return false;
  unsigned base = 10;
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X')) {
    base = 16;
    token.remove_prefix(2);
  } else if (token.back() == 'h' || token.back() == 'H') {
    base = 16;
    token.remove_suffix(1);
  }
  if (token.empty()) return false;
  unsigned long long v = 0;
  for (char c : token) {
    int d;
    if (c >= '0' && c <= '9') {
      d = c - '0';
    } else if (base == 16 && ((c | 0x20) >= 'a' && (c | 0x20) <= 'f')) {
      d = (c | 0x20) - 'a' + 10;
    } else {
      return false;
    }
    v = v > (~0ULL >> 4) ? ~0ULL : v * base + static_cast<unsigned>(d);
  }
  value = v;
  return true;
}

FeatureVector extract_md2(const AsmListing& listing) {
  return {static_cast<double>(listing.file_size_bytes), static_cast<double>(listing.line_count)};
}

FeatureVector extract_sym(const AsmListing& listing) {
  static constexpr std::array<char, 7> kSymbols = {'-', '+', '*', ']', '[', '?', '@'};
  FeatureVector v(kDimSYM, 0.0);
  for (const auto& line : listing.lines) {
    for (char c : line.raw) {
      for (std::size_t k = 0; k < kSymbols.size(); ++k)
        if (c == kSymbols[k]) v[k] += 1.0;
    }
  }
  for (std::size_t k = 0; k < kSymbols.size(); ++k) v[kDimSYM - 1] += v[k];
  return v;
}

FeatureVector extract_opc(const AsmListing& listing, const LexiconConfig& lexicon) {
  const auto index = index_of(lexicon.opcodes);
  FeatureVector v(lexicon.opcodes.size(), 0.0);
  for (const auto& line : listing.lines) {
    if (!line.mnemonic) continue;
    if (auto it = index.find(lower(*line.mnemonic)); it != index.end()) v[it->second] += 1.0;
  }
  return v;
}

FeatureVector extract_reg(const AsmListing& listing, const LexiconConfig& lexicon) {
  const auto index = index_of(lexicon.registers);
  FeatureVector v(lexicon.registers.size(), 0.0);
  std::string buf;
  for (const auto& line : listing.lines) {
    for (const auto& operand : line.operands) {
      for_each_word(operand, buf, [&](const std::string& w) {
        if (auto it = index.find(w); it != index.end()) v[it->second] += 1.0;
      });
    }
  }
  return v;
}

FeatureVector extract_api(const AsmListing& listing, const LexiconConfig& lexicon) {
  const auto index = index_of(lexicon.apis);
  FeatureVector v(lexicon.apis.size(), 0.0);
  std::string buf;
  for (const auto& line : listing.lines) {
    for_each_word(line.raw, buf, [&](const std::string& w) {
      if (auto it = index.find(w); it != index.end()) v[it->second] += 1.0;
    });
  }
  return v;
}

FeatureVector extract_sec(const AsmListing& listing) {
  FeatureVector v(kDimSEC, 0.0);
  std::array<double, kKnownSections.size()> known_lines{};
  double unknown_lines = 0.0;
  double known_distinct = 0.0;
  double unknown_distinct = 0.0;
  for (const auto& [name, count] : listing.section_line_counts) {
    const int k = known_section_index(name);
    if (k >= 0) {
      known_lines[static_cast<std::size_t>(k)] += static_cast<double>(count);
      known_distinct += 1.0;
    } else {
      unknown_lines += static_cast<double>(count);
      unknown_distinct += 1.0;
    }
  }
  const double total_lines = static_cast<double>(listing.lines.size());
  const double distinct = known_distinct + unknown_distinct;
  double known_total = 0.0;
  for (std::size_t k = 0; k < known_lines.size(); ++k) {
    v[k] = known_lines[k];
    known_total += known_lines[k];
  }
  v[9] = distinct;
  v[10] = unknown_distinct;
  v[11] = unknown_lines;
  v[12] = ratio(known_distinct, distinct);
  v[13] = ratio(unknown_distinct, distinct);
  v[14] = ratio(unknown_lines, total_lines);
  static constexpr std::array<std::string_view, 9> kPorOrder = {".text",  ".data", ".bss", ".rdata", ".edata",
                                                                ".idata", ".rsrc", ".tls", ".reloc"};
  for (std::size_t i = 0; i < kPorOrder.size(); ++i) {
    const auto k = static_cast<std::size_t>(known_section_index(kPorOrder[i]));
    v[15 + i] = ratio(known_lines[k], total_lines);
  }
  v[24] = ratio(known_total, total_lines);
  return v;
}

FeatureVector extract_dp(const AsmListing& listing) {
  enum Where { Text, Rdata, Data, Idata, Unknown, OtherKnown };
  struct Counts {
    double lines = 0, db = 0, dd = 0, dw = 0, db0 = 0, db3 = 0, dd4 = 0, dd5 = 0, dd6 = 0;
  };
  Counts all;
  std::array<Counts, 6> by{};

  for (const auto& line : listing.lines) {
    const std::string section = lower(line.section);
    Where where = OtherKnown;
    if (section == ".text") where = Text;
    else if (section == ".rdata") where = Rdata;
    else if (section == ".data") where = Data;
    else if (section == ".idata") where = Idata;
    else if (known_section_index(section) < 0) where = Unknown;

    Counts delta;
    delta.lines = 1;
    if (line.mnemonic) {
      const std::string m = lower(*line.mnemonic);
      const std::size_t nops = line.operands.size();
      if (m == "db") {
        delta.db = 1;
        unsigned long long value = 0;
        if (nops == 1 && parse_numeric_literal(line.operands[0], value)) {
          if (value == 0) delta.db0 = 1;
          else delta.db3 = 1;
        }
      } else if (m == "dd") {
        delta.dd = 1;
        delta.dd4 = nops == 4;
        delta.dd5 = nops == 5;
        delta.dd6 = nops == 6;
      } else if (m == "dw") {
        delta.dw = 1;
      }
    }
    for (Counts* c : {&all, &by[where]}) {
      c->lines += delta.lines;
      c->db += delta.db;
      c->dd += delta.dd;
      c->dw += delta.dw;
      c->db0 += delta.db0;
      c->db3 += delta.db3;
      c->dd4 += delta.dd4;
      c->dd5 += delta.dd5;
      c->dd6 += delta.dd6;
    }
  }

  const double n = all.lines;
  const Counts& unk = by[Unknown];
  return {
      ratio(all.db, n),
      ratio(all.dd, n),
      ratio(all.dw, n),
      ratio(all.db + all.dd + all.dw, n),
      ratio(all.db0, n),
      ratio(all.db - all.db0, n),
      ratio(by[Text].dd, by[Text].lines),
      ratio(by[Text].db, by[Text].lines),
      ratio(by[Rdata].dd, by[Rdata].lines),
      ratio(by[Rdata].db3, by[Rdata].lines),
      ratio(by[Data].db3, by[Data].lines),
      ratio(all.db3, n),
      ratio(all.dd4, all.dd),
      ratio(all.dd5, all.dd),
      ratio(all.dd6, all.dd),
      ratio(all.dd4, n),
      ratio(all.dd5, n),
      ratio(all.dd6, n),
      ratio(by[Idata].db3, by[Idata].lines),
      ratio(unk.db3, unk.lines),
      ratio(unk.dd4, unk.lines),
      ratio(unk.dd5, unk.lines),
      ratio(unk.dd6, unk.lines),
      ratio(all.db0, all.db3),
  };
}

FeatureVector extract_misc(const AsmListing& listing, const LexiconConfig& lexicon) {
  const auto& words = lexicon.keywords;
  FeatureVector v(words.size(), 0.0);
  std::vector<bool> border(words.size());
  for (std::size_t k = 0; k < words.size(); ++k) border[k] = is_dash_keyword(words[k]);

  std::string text;
  for (const auto& line : listing.lines) {
    text = lower(line.raw);
    std::size_t longest_dash_run = 0;
    for (std::size_t i = 0, run = 0; i < text.size(); ++i) {
      run = text[i] == '-' ? run + 1 : 0;
      longest_dash_run = std::max(longest_dash_run, run);
    }
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (border[k]) {
        if (longest_dash_run >= kBorderDashes) v[k] += 1.0;
        continue;
      }
      const auto& w = words[k];
      for (std::size_t pos = text.find(w); pos != std::string::npos; pos = text.find(w, pos + w.size())) v[k] += 1.0;
    }
  }
  return v;
}

}  // namespace malclass
