#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace malclass {

inline constexpr std::size_t kOpcodeCount = 93;
inline constexpr std::size_t kRegisterCount = 26;
inline constexpr std::size_t kKeywordCount = 95;
inline constexpr std::size_t kDefaultApiCount = 794;

/// The nine standard PE section names, in the order used by the SEC layout.
inline constexpr std::array<std::string_view, 9> kKnownSections = {
    ".bss", ".data", ".edata", ".idata", ".rdata", ".rsrc", ".text", ".tls", ".reloc"};

/// Word lists driving the OPC, REG, API and MISC categories. Entries are
/// lower-case and unique; immutable once loaded.
struct LexiconConfig {
  std::vector<std::string> opcodes;
  std::vector<std::string> registers;
  std::vector<std::string> apis;
  std::vector<std::string> keywords;

  /// Throws DataError if a list has the wrong length or repeats an entry.
  void validate() const;
};

/// One entry per line; blank lines and `#` comments skipped; lower-cased.
std::vector<std::string> parse_word_list(std::string_view text);

/// The lists shipped in data/lexicon, compiled into the library.
const LexiconConfig& default_lexicon();

/// Reads opcodes.txt, registers.txt, apis.txt and keywords.txt from `dir`.
/// Files that are absent fall back to the defaults.
LexiconConfig load_lexicon(const std::filesystem::path& dir);

/// Writes the four files into `dir`.
void write_lexicon(const LexiconConfig& lexicon, const std::filesystem::path& dir);

}  // namespace malclass
