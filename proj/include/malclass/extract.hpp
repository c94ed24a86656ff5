#pragma once

#include <span>
#include <string>
#include <vector>

#include "malclass/categories.hpp"
#include "malclass/corpus.hpp"
#include "malclass/lexicon.hpp"

namespace malclass {

using FeatureVector = std::vector<double>;

struct SampleFeatures {
  /// One vector per requested category, in request order.
  std::vector<FeatureVector> values;
  /// Extraction wall time per requested category, in seconds.
  std::vector<double> seconds;
  double hex_parse_seconds = 0.0;
  double asm_parse_seconds = 0.0;
  std::vector<std::string> warnings;
};

/// Parses whichever views the categories need and runs their extractors. A
/// missing or unreadable view yields zero vectors plus a warning.
SampleFeatures extract_sample(const SampleRef& sample, const LexiconConfig& lexicon,
                              std::span<const Category> categories);

struct CategoryTiming {
  std::string name;
  double total_seconds = 0.0;
  double mean_seconds = 0.0;
};

struct ExtractionResult {
  /// One matrix per requested category, rows in manifest order.
  std::vector<FeatureMatrix> matrices;
  /// Per category, then `hexparse` and `asmparse` rows.
  std::vector<CategoryTiming> timings;
  std::vector<std::string> warnings;
};

/// Throws DataError on an empty manifest.
ExtractionResult extract_corpus(const Manifest& manifest, const LexiconConfig& lexicon,
                                std::span<const Category> categories, int workers = 1);

}  // namespace malclass
