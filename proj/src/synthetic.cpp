#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "malclass/corpus.hpp"
#include "malclass/errors.hpp"
#include "malclass/hexparse.hpp"
#include "malclass/lexicon.hpp"
#include "malclass/parallel.hpp"

namespace malclass {

namespace {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Generative profile shared by all samples of one family.
struct FamilyProfile {
  std::array<std::uint8_t, 24> byte_palette{};
  double palette_share = 0.0;
  double random_share = 0.0;
  double string_share = 0.0;
  std::size_t string_length = 0;
  std::size_t base_size = 0;
  std::size_t missing_run = 0;
  std::uint64_t first_address = 0;

  struct Section {
    std::string name;
    double share;
    bool code;
  };
  std::vector<Section> sections;
  std::vector<std::string> opcodes;
  std::vector<std::string> registers;
  std::vector<std::string> apis;
  std::vector<std::string> keywords;
  std::size_t base_lines = 0;
  double data_db_share = 0.0;
  double data_dd_share = 0.0;
  std::size_t dd_params = 0;
  std::size_t borders = 0;
};

const std::vector<std::vector<std::pair<std::string, bool>>>& section_layouts() {
  static const std::vector<std::vector<std::pair<std::string, bool>>> layouts = {
      {{".text", true}, {".rdata", false}, {".data", false}, {".idata", false}},
      {{".text", true}, {".data", false}, {".rsrc", false}},
      {{".text", true}, {".rdata", false}, {".data", false}, {".reloc", false}},
      {{".aspack", false}, {".adata", false}, {".text", true}},
      {{"CODE", true}, {"DATA", false}, {"BSS", false}},
      {{".text", true}, {".rdata", false}, {".data", false}, {".tls", false}, {".rsrc", false}},
      {{"UPX0", false}, {"UPX1", true}, {".rsrc", false}},
      {{".text", true}, {".data", false}, {".bss", false}, {".edata", false}, {".idata", false}},
      {{".text", true}, {".rdata", false}, {".data", false}, {".rsrc", false}, {".reloc", false}},
  };
  return layouts;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& pool, std::size_t count, Rng& rng) {
  std::vector<T> copy(pool);
  std::shuffle(copy.begin(), copy.end(), rng);
  copy.resize(std::min(count, copy.size()));
  return copy;
}

FamilyProfile make_profile(int family, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xFA11, static_cast<std::uint64_t>(family)));
  const auto& lex = default_lexicon();
  FamilyProfile p;
  const auto f = static_cast<std::size_t>(family);

  for (auto& b : p.byte_palette) b = static_cast<std::uint8_t>(uniform(rng, 256));
  p.palette_share = 0.35 + 0.05 * static_cast<double>(f % 7);
  p.random_share = 0.05 + 0.07 * static_cast<double>(f % 9);
  p.string_share = 0.04 + 0.03 * static_cast<double>((f * 5) % 9);
  p.string_length = 3 + 4 * (f % 8);
  p.base_size = 12000 + 2500 * (f % 10);
  p.missing_run = family % 3 == 0 ? 512 + 64 * f : 0;
  p.first_address = 0x400000 + 0x1000 * (f + 1);

  const auto& layout = section_layouts()[f % section_layouts().size()];
  double total = 0.0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const double share = layout[i].second ? 4.0 + static_cast<double>(f % 3) : 1.0 + static_cast<double>(i % 2);
    p.sections.push_back({layout[i].first, share, layout[i].second});
    total += share;
  }
  for (auto& s : p.sections) s.share /= total;
  if (f >= section_layouts().size()) p.sections.push_back({".f" + std::to_string(f), 0.1, false});

  p.opcodes = pick(lex.opcodes, 10, rng);
  p.registers = pick(lex.registers, 6, rng);
  p.apis = pick(lex.apis, 12, rng);
  p.keywords = pick(std::vector<std::string>(lex.keywords.begin() + 1, lex.keywords.end()), 8, rng);
  p.base_lines = 700 + 120 * (f % 10);
  p.data_db_share = 0.2 + 0.08 * static_cast<double>(f % 8);
  p.data_dd_share = 0.1 + 0.05 * static_cast<double>((f * 3) % 8);
  p.dd_params = 4 + f % 3;
  p.borders = 2 + 3 * (f % 5);
  return p;
}

std::string random_id(Rng& rng) {
  static constexpr char kAlphabet[] = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::string id(20, '0');
  for (char& c : id) c = kAlphabet[uniform(rng, sizeof kAlphabet - 1)];
  return id;
}

std::vector<std::uint16_t> make_bytes(const FamilyProfile& p, Rng& rng) {
  const std::size_t n = p.base_size + uniform(rng, 4000);
  std::vector<std::uint16_t> bytes;
  bytes.reserve(n + p.missing_run);
  const auto code_end = static_cast<std::size_t>(static_cast<double>(n) * (1.0 - p.random_share - p.string_share));
  const auto string_end = static_cast<std::size_t>(static_cast<double>(n) * (1.0 - p.random_share));

  while (bytes.size() < code_end) {
    if (unit(rng) < p.palette_share) bytes.push_back(p.byte_palette[uniform(rng, p.byte_palette.size())]);
    else if (unit(rng) < 0.3) bytes.push_back(0);
    else bytes.push_back(static_cast<std::uint16_t>(uniform(rng, 256)));
  }
  while (bytes.size() < string_end) {
    const std::size_t len = p.string_length + uniform(rng, 3);
    for (std::size_t i = 0; i < len; ++i) bytes.push_back(static_cast<std::uint16_t>(0x41 + uniform(rng, 26)));
    bytes.push_back(0);
  }
  while (bytes.size() < n) bytes.push_back(static_cast<std::uint16_t>(uniform(rng, 256)));
  for (std::size_t i = 0; i < p.missing_run; ++i) bytes.push_back(kMissingByte);
  return bytes;
}

std::string hex8(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string s(8, '0');
  for (int i = 7; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

std::string hex_literal(std::uint64_t v) {
  std::string digits;
  static constexpr char kDigits[] = "0123456789ABCDEF";
  do {
    digits.insert(digits.begin(), kDigits[v & 0xF]);
    v >>= 4;
  } while (v);
  if (digits.front() > '9') digits.insert(digits.begin(), '0');
  return digits.size() == 1 ? digits : digits + "h";
}

std::string byte_column(Rng& rng, std::size_t count) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string s;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) s.push_back(' ');
    s.push_back(kDigits[uniform(rng, 16)]);
    s.push_back(kDigits[uniform(rng, 16)]);
  }
  return s;
}

std::string make_asm(const FamilyProfile& p, Rng& rng) {
  const auto& lex = default_lexicon();
  const std::size_t total_lines = p.base_lines + uniform(rng, 200);
  std::string out;
  std::uint64_t address = p.first_address;
  const std::string border(75, '-');

  for (const auto& section : p.sections) {
    const auto lines = std::max<std::size_t>(1, static_cast<std::size_t>(section.share * static_cast<double>(total_lines)));
    const std::string prefix = section.name + ":";
    for (std::size_t i = 0; i < lines; ++i) {
      std::string line = prefix + hex8(address) + " ";
      if (i % (lines / (p.borders + 1) + 1) == 0) {
        line += "; " + border;
      } else if (section.code) {
        const std::size_t nbytes = 1 + uniform(rng, 6);
        line += byte_column(rng, nbytes) + std::string(8, ' ');
        address += nbytes;
        const double u = unit(rng);
        if (u < 0.08) {
          line += "call    ds:" + p.apis[uniform(rng, p.apis.size())];
        } else {
          const auto& op = u < 0.7 ? p.opcodes[uniform(rng, p.opcodes.size())]
                                   : lex.opcodes[uniform(rng, lex.opcodes.size())];
          const auto& reg = unit(rng) < 0.75 ? p.registers[uniform(rng, p.registers.size())]
                                             : lex.registers[uniform(rng, lex.registers.size())];
          line += op + "     " + reg;
          const double v = unit(rng);
          if (v < 0.3) line += ", dword ptr [" + reg + "+" + hex_literal(uniform(rng, 256)) + "]";
          else if (v < 0.6) line += ", " + hex_literal(uniform(rng, 0x10000));
        }
        if (unit(rng) < 0.05) line += " ; " + p.keywords[uniform(rng, p.keywords.size())];
      } else {
        const double u = unit(rng);
        if (u < p.data_db_share) {
          line += byte_column(rng, 1) + std::string(8, ' ');
          address += 1;
          line += "db " + hex_literal(unit(rng) < 0.3 ? 0 : uniform(rng, 256));
        } else if (u < p.data_db_share + p.data_dd_share) {
          const std::size_t params = unit(rng) < 0.8 ? p.dd_params : 4 + uniform(rng, 3);
          line += byte_column(rng, 16) + "+ dd ";
          address += 4 * params;
          for (std::size_t k = 0; k < params; ++k) {
            if (k) line += ", ";
            line += hex_literal(rng() & 0xFFFFFFFFULL);
          }
        } else if (u < p.data_db_share + p.data_dd_share + 0.1) {
          line += byte_column(rng, 2) + std::string(8, ' ');
          address += 2;
          line += "dw " + hex_literal(uniform(rng, 0x10000));
        } else {
          line += "; " + p.keywords[uniform(rng, p.keywords.size())] + " " +
                  p.apis[uniform(rng, p.apis.size())];
        }
      }
      out += line;
      out += "\r\n";
    }
  }
  return out;
}

}  // namespace

Manifest generate_synthetic_corpus(const std::filesystem::path& dir, int families, int per_family,
                                   std::uint64_t seed) {
  if (families < 2 || per_family < 2) throw DataError("synthetic corpus needs at least 2 families of 2 samples");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());

  Manifest manifest;
  manifest.class_count = families;
  std::set<std::string> ids;
  Rng id_rng(derive_seed(seed, 0x1D));
  for (int s = 0; s < per_family; ++s) {
    for (int f = 0; f < families; ++f) {
      std::string id;
      do id = random_id(id_rng);
      while (!ids.insert(id).second);
      manifest.entries.push_back({id, dir / (id + ".bytes"), dir / (id + ".asm"), f + 1});
    }
  }

  std::vector<FamilyProfile> profiles;
  for (int f = 0; f < families; ++f) profiles.push_back(make_profile(f, seed));

  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const auto& profile = profiles[static_cast<std::size_t>(*e.label - 1)];
    Rng rng(derive_seed(seed, 0x5A, i));
    const auto bytes = make_bytes(profile, rng);
    write_text_file(e.bytes_path, render_hexdump(profile.first_address, bytes));
    write_text_file(e.asm_path, make_asm(profile, rng));
  }
  write_manifest(manifest, dir / "trainLabels.csv");
  return manifest;
}

}  // namespace malclass
