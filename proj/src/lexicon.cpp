#include "malclass/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "default_lexicons.inc"
#include "malclass/corpus.hpp"
#include "malclass/errors.hpp"

namespace malclass {

namespace {

void check_list(const std::vector<std::string>& list, const char* name, std::size_t expected) {
  if (expected != 0 && list.size() != expected)
    throw DataError(std::string("lexicon ") + name + " has " + std::to_string(list.size()) +
                    " entries, expected " + std::to_string(expected));
  if (list.empty()) throw DataError(std::string("lexicon ") + name + " is empty");
  std::set<std::string> seen;
  for (const auto& word : list) {
    if (!seen.insert(word).second) throw DataError(std::string("lexicon ") + name + " repeats '" + word + "'");
  }
}

std::string render_list(const std::vector<std::string>& list) {
  std::string out;
  for (const auto& w : list) out += w + "\n";
  return out;
}

}  // namespace

void LexiconConfig::validate() const {
  check_list(opcodes, "opcodes", kOpcodeCount);
  check_list(registers, "registers", kRegisterCount);
  check_list(apis, "apis", 0);
  check_list(keywords, "keywords", kKeywordCount);
}

std::vector<std::string> parse_word_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    std::string word(line);
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(word));
  }
  return out;
}

const LexiconConfig& default_lexicon() {
  static const LexiconConfig lexicon = [] {
    LexiconConfig l;
    l.opcodes = parse_word_list(embedded::k_opcodes);
    l.registers = parse_word_list(embedded::k_registers);
    l.apis = parse_word_list(embedded::k_apis);
    l.keywords = parse_word_list(embedded::k_keywords);
    l.validate();
    return l;
  }();
  return lexicon;
}

LexiconConfig load_lexicon(const std::filesystem::path& dir) {
  LexiconConfig l = default_lexicon();
  auto load = [&](const char* file, std::vector<std::string>& target) {
    const auto path = dir / file;
    if (std::filesystem::exists(path)) target = parse_word_list(read_text_file(path));
  };
  load("opcodes.txt", l.opcodes);
  load("registers.txt", l.registers);
  load("apis.txt", l.apis);
  load("keywords.txt", l.keywords);
  l.validate();
  return l;
}

void write_lexicon(const LexiconConfig& lexicon, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "opcodes.txt", render_list(lexicon.opcodes));
  write_text_file(dir / "registers.txt", render_list(lexicon.registers));
  write_text_file(dir / "apis.txt", render_list(lexicon.apis));
  write_text_file(dir / "keywords.txt", render_list(lexicon.keywords));
}

}  // namespace malclass
