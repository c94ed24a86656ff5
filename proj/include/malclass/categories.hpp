#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malclass/lexicon.hpp"

namespace malclass {

enum class Category {
  OneGram,
  MD1,
  ENT,
  IMG1,
  IMG2,
  STR,
  MD2,
  SYM,
  OPC,
  REG,
  API,
  SEC,
  DP,
  MISC,
};

inline constexpr std::size_t kCategoryCount = 14;

inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::OneGram, Category::MD1, Category::ENT, Category::IMG1, Category::IMG2,
    Category::STR,     Category::MD2, Category::SYM, Category::OPC,  Category::REG,
    Category::API,     Category::SEC, Category::DP,  Category::MISC};

enum class FeatureSource { Hex, Asm };

struct CategoryLayout {
  Category id;
  std::string name;
  std::size_t dimension;
  FeatureSource source;
  std::vector<std::string> feature_names;
};

inline constexpr std::size_t kDim1G = 256;
inline constexpr std::size_t kDimMD1 = 2;
inline constexpr std::size_t kDimENT = 105;
inline constexpr std::size_t kDimIMG1 = 52;
inline constexpr std::size_t kDimIMG2 = 108;
inline constexpr std::size_t kDimSTR = 116;
inline constexpr std::size_t kDimMD2 = 2;
inline constexpr std::size_t kDimSYM = 8;
inline constexpr std::size_t kDimSEC = 25;
inline constexpr std::size_t kDimDP = 24;

std::string_view category_name(Category c);

/// Accepts the short ids (`1G`, `ENT`, ...), case-insensitive.
Category parse_category(std::string_view name);

/// Comma-separated ids; `all` (or an empty string) selects every category.
std::vector<Category> parse_category_list(std::string_view list);

/// Column names are `<category>_<feature>`; API/OPC/REG/MISC names follow
/// the lexicon.
CategoryLayout category_layout(Category c, const LexiconConfig& lexicon);

std::vector<CategoryLayout> category_registry(const LexiconConfig& lexicon);

}  // namespace malclass
