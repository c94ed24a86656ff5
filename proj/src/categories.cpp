#include "malclass/categories.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "malclass/errors.hpp"
#include "malclass/hexfeat.hpp"

namespace malclass {

namespace {

constexpr const char* kHaralickNames[kHaralickFeatureCount] = {
    "asm",          "contrast",     "correlation", "variance",      "idm",  "sum_average", "sum_variance",
    "sum_entropy",  "entropy",      "diff_variance", "diff_entropy", "imc1", "imc2"};

constexpr const char* kDirectionNames[4] = {"0", "45", "90", "135"};

constexpr const char* kSymNames[kDimSYM] = {"minus", "plus", "star", "rbracket", "lbracket", "question", "at",
                                            "total"};

constexpr const char* kDpNames[kDimDP] = {
    "db_por",    "dd_por",    "dw_por",    "dc_por",     "db0_por",   "dbN0_por",   "dd_text",     "db_text",
    "dd_rdata",  "db3_rdata", "db3_data",  "db3_all",    "dd4",       "dd5",        "dd6",         "dd4_all",
    "dd5_all",   "dd6_all",   "db3_idata", "db3_NdNt",   "dd4_NdNt",  "dd5_NdNt",   "dd6_NdNt",    "db3_zero_all"};

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string sanitize(std::string_view word) {
  if (!word.empty() && std::all_of(word.begin(), word.end(), [](char c) { return c == '-'; })) return "block_border";
  std::string out;
  for (unsigned char c : word) out.push_back(std::isalnum(c) ? static_cast<char>(c) : '_');
  return out;
}

std::vector<std::string> prefixed(std::string_view prefix, const std::vector<std::string>& words, bool clean) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string name = std::string(prefix) + "_" + (clean ? sanitize(words[i]) : words[i]);
    if (!seen.insert(name).second) name += "_" + std::to_string(i);
    seen.insert(name);
    out.push_back(std::move(name));
  }
  return out;
}

}  // namespace

std::string_view category_name(Category c) {
  switch (c) {
    case Category::OneGram: return "1G";
    case Category::MD1: return "MD1";
    case Category::ENT: return "ENT";
    case Category::IMG1: return "IMG1";
    case Category::IMG2: return "IMG2";
    case Category::STR: return "STR";
    case Category::MD2: return "MD2";
    case Category::SYM: return "SYM";
    case Category::OPC: return "OPC";
    case Category::REG: return "REG";
    case Category::API: return "API";
    case Category::SEC: return "SEC";
    case Category::DP: return "DP";
    case Category::MISC: return "MISC";
  }
  throw InvariantError("unknown category");
}

Category parse_category(std::string_view name) {
  const std::string wanted = upper(name);
  for (Category c : kAllCategories)
    if (category_name(c) == wanted) return c;
  throw UsageError("unknown feature category '" + std::string(name) + "'");
}

std::vector<Category> parse_category_list(std::string_view list) {
  std::vector<Category> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t end = list.find(',', pos);
    if (end == std::string_view::npos) end = list.size();
    std::string_view item = list.substr(pos, end - pos);
    pos = end + 1;
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) continue;
    if (upper(item) == "ALL") {
      out.assign(kAllCategories.begin(), kAllCategories.end());
      continue;
    }
    const Category c = parse_category(item);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  if (out.empty()) out.assign(kAllCategories.begin(), kAllCategories.end());
  return out;
}

CategoryLayout category_layout(Category c, const LexiconConfig& lexicon) {
  CategoryLayout layout{c, std::string(category_name(c)), 0, FeatureSource::Hex, {}};
  auto& names = layout.feature_names;
  const std::string p = layout.name + "_";
  switch (c) {
    case Category::OneGram: {
      static constexpr char kHex[] = "0123456789abcdef";
      for (int b = 0; b < 256; ++b) names.push_back(p + kHex[b >> 4] + kHex[b & 15]);
      break;
    }
    case Category::MD1:
      names = {p + "file_size", p + "first_address"};
      break;
    case Category::ENT:
      names = {p + "whole_file", p + "window_count", p + "mean", p + "variance", p + "min", p + "max"};
      for (int q = 1; q <= 99; ++q) names.push_back(p + "p" + std::to_string(q));
      break;
    case Category::IMG1:
      for (const char* dir : kDirectionNames)
        for (const char* stat : kHaralickNames) names.push_back(p + dir + "_" + stat);
      break;
    case Category::IMG2:
      for (int r : kLbpRadii)
        for (std::size_t k = 0; k < kLbpPatterns; ++k) names.push_back(p + "r" + std::to_string(r) + "_" + std::to_string(k));
      break;
    case Category::STR:
      for (std::size_t len = kMinStringLength; len <= kMaxBinnedStringLength; ++len)
        names.push_back(p + "len" + std::to_string(len));
      names.push_back(p + "len_over" + std::to_string(kMaxBinnedStringLength));
      break;
    case Category::MD2:
      layout.source = FeatureSource::Asm;
      names = {p + "file_size", p + "line_count"};
      break;
    case Category::SYM:
      layout.source = FeatureSource::Asm;
      for (const char* s : kSymNames) names.push_back(p + s);
      break;
    case Category::OPC:
      layout.source = FeatureSource::Asm;
      names = prefixed(layout.name, lexicon.opcodes, true);
      break;
    case Category::REG:
      layout.source = FeatureSource::Asm;
      names = prefixed(layout.name, lexicon.registers, true);
      break;
    case Category::API:
      layout.source = FeatureSource::Asm;
      names = prefixed(layout.name, lexicon.apis, true);
      break;
    case Category::SEC:
      layout.source = FeatureSource::Asm;
      for (auto s : kKnownSections) names.push_back(p + "section_names_" + std::string(s));
      for (const char* s : {"Num_Sections", "Unknown_Sections", "Unknown_Sections_lines", "known_Sections_por",
                            "Unknown_Sections_por", "Unknown_Sections_lines_por"})
        names.push_back(p + s);
      for (auto s : {".text", ".data", ".bss", ".rdata", ".edata", ".idata", ".rsrc", ".tls", ".reloc"})
        names.push_back(p + s + "_por");
      names.push_back(p + "known_Sections_lines_por");
      break;
    case Category::DP:
      layout.source = FeatureSource::Asm;
      for (const char* s : kDpNames) names.push_back(p + s);
      break;
    case Category::MISC:
      layout.source = FeatureSource::Asm;
      names = prefixed(layout.name, lexicon.keywords, true);
      break;
  }
  layout.dimension = names.size();
  return layout;
}

std::vector<CategoryLayout> category_registry(const LexiconConfig& lexicon) {
  std::vector<CategoryLayout> out;
  for (Category c : kAllCategories) out.push_back(category_layout(c, lexicon));
  return out;
}

}  // namespace malclass
