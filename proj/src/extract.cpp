#include "malclass/extract.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>

#include "malclass/asmfeat.hpp"
#include "malclass/asmparse.hpp"
#include "malclass/errors.hpp"
#include "malclass/hexfeat.hpp"
#include "malclass/hexparse.hpp"
#include "malclass/parallel.hpp"

namespace malclass {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

SampleFeatures extract_sample(const SampleRef& sample, const LexiconConfig& lexicon,
                              std::span<const Category> categories) {
  SampleFeatures out;
  out.values.resize(categories.size());
  out.seconds.assign(categories.size(), 0.0);

  const bool need_hex = std::any_of(categories.begin(), categories.end(), [&](Category c) {
    return category_layout(c, lexicon).source == FeatureSource::Hex;
  });
  const bool need_asm = std::any_of(categories.begin(), categories.end(), [&](Category c) {
    return category_layout(c, lexicon).source == FeatureSource::Asm;
  });

  std::optional<HexDump> dump;
  if (need_hex) {
    const auto start = Clock::now();
    try {
      if (!std::filesystem::exists(sample.bytes_path)) throw DataError("missing file " + sample.bytes_path.string());
      dump = parse_hexdump(read_text_file(sample.bytes_path));
      if (dump->bytes.empty()) out.warnings.push_back(sample.id + ": hex dump holds no bytes");
    } catch (const DataError& e) {
      out.warnings.push_back(sample.id + ": hex view unusable (" + e.what() + "), hex categories set to zero");
    }
    out.hex_parse_seconds = seconds_since(start);
  }

  std::optional<AsmListing> listing;
  if (need_asm) {
    const auto start = Clock::now();
    try {
      if (!std::filesystem::exists(sample.asm_path)) throw DataError("missing file " + sample.asm_path.string());
      listing = parse_asm(read_text_file(sample.asm_path));
    } catch (const DataError& e) {
      out.warnings.push_back(sample.id + ": assembly view unusable (" + e.what() + "), asm categories set to zero");
    }
    out.asm_parse_seconds = seconds_since(start);
  }

  // The image is shared by IMG1 and IMG2; its construction is charged to
  // whichever of them runs first.
  std::optional<GrayImage> image;
  bool image_failed = false;
  auto get_image = [&]() -> const GrayImage* {
    if (!image && !image_failed) {
      try {
        image = to_image(*dump);
      } catch (const DataError&) {
        image_failed = true;
        out.warnings.push_back(sample.id + ": no usable bytes for the image view, texture features set to zero");
      }
    }
    return image ? &*image : nullptr;
  };

  for (std::size_t i = 0; i < categories.size(); ++i) {
    const Category c = categories[i];
    const auto layout = category_layout(c, lexicon);
    FeatureVector v;
    const auto start = Clock::now();
    if (layout.source == FeatureSource::Hex && dump) {
      switch (c) {
        case Category::OneGram: v = extract_1g(*dump); break;
        case Category::MD1: v = extract_md1(*dump); break;
        case Category::ENT: v = extract_ent(*dump); break;
        case Category::STR: v = extract_str(*dump); break;
        case Category::IMG1:
        case Category::IMG2:
          if (const GrayImage* img = get_image()) v = c == Category::IMG1 ? extract_img1(*img) : extract_img2(*img);
          break;
        default: break;
      }
    } else if (layout.source == FeatureSource::Asm && listing) {
      switch (c) {
        case Category::MD2: v = extract_md2(*listing); break;
        case Category::SYM: v = extract_sym(*listing); break;
        case Category::OPC: v = extract_opc(*listing, lexicon); break;
        case Category::REG: v = extract_reg(*listing, lexicon); break;
        case Category::API: v = extract_api(*listing, lexicon); break;
        case Category::SEC: v = extract_sec(*listing); break;
        case Category::DP: v = extract_dp(*listing); break;
        case Category::MISC: v = extract_misc(*listing, lexicon); break;
        default: break;
      }
    }
    out.seconds[i] = seconds_since(start);
    if (v.empty()) v.assign(layout.dimension, 0.0);
    if (v.size() != layout.dimension)
      throw InvariantError(layout.name + " extractor produced " + std::to_string(v.size()) + " values, expected " +
                           std::to_string(layout.dimension));
    out.values[i] = std::move(v);
  }
  return out;
}

ExtractionResult extract_corpus(const Manifest& manifest, const LexiconConfig& lexicon,
                                std::span<const Category> categories, int workers) {
  if (manifest.entries.empty()) throw DataError("manifest has no samples");
  const std::size_t n = manifest.entries.size();
  std::vector<SampleFeatures> per_sample(n);
  parallel_for(n, workers, [&](std::size_t i) {
    per_sample[i] = extract_sample(manifest.entries[i], lexicon, categories);
  });

  ExtractionResult result;
  const auto ids = manifest.ids();
  for (std::size_t ci = 0; ci < categories.size(); ++ci) {
    auto layout = category_layout(categories[ci], lexicon);
    FeatureMatrix m;
    m.sample_ids = ids;
    m.category_ids = {layout.name};
    m.column_names = layout.feature_names;
    m.values = Matrix(n, layout.dimension);
    CategoryTiming timing{layout.name, 0.0, 0.0};
    for (std::size_t r = 0; r < n; ++r) {
      std::copy(per_sample[r].values[ci].begin(), per_sample[r].values[ci].end(), m.values.row(r).begin());
      timing.total_seconds += per_sample[r].seconds[ci];
    }
    timing.mean_seconds = timing.total_seconds / static_cast<double>(n);
    m.validate();
    result.matrices.push_back(std::move(m));
    result.timings.push_back(timing);
  }
  CategoryTiming hex{"hexparse", 0.0, 0.0}, as{"asmparse", 0.0, 0.0};
  for (const auto& s : per_sample) {
    hex.total_seconds += s.hex_parse_seconds;
    as.total_seconds += s.asm_parse_seconds;
    result.warnings.insert(result.warnings.end(), s.warnings.begin(), s.warnings.end());
  }
  hex.mean_seconds = hex.total_seconds / static_cast<double>(n);
  as.mean_seconds = as.total_seconds / static_cast<double>(n);
  result.timings.push_back(hex);
  result.timings.push_back(as);
  return result;
}

}  // namespace malclass
