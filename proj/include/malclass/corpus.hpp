#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malclass/matrix.hpp"

namespace malclass {

inline constexpr int kDefaultClassCount = 9;

struct SampleRef {
  std::string id;
  std::filesystem::path bytes_path;
  std::filesystem::path asm_path;
  /// 1-based family label as stored on disk.
  std::optional<int> label;
};

struct Manifest {
  std::vector<SampleRef> entries;
  int class_count = kDefaultClassCount;

  bool labeled() const;
  /// 0-based labels; throws DataError if any entry is unlabeled.
  std::vector<int> zero_based_labels() const;
  std::vector<std::string> ids() const;
};

/// Reads an `Id,Class` CSV (Class optional) and resolves `<dir>/<Id>.bytes`
/// and `<dir>/<Id>.asm`. Rejects duplicate ids, out-of-range labels and
/// samples with neither file present.
Manifest load_manifest(const std::filesystem::path& path, const std::filesystem::path& bytes_dir,
                       const std::filesystem::path& asm_dir, int class_count = kDefaultClassCount);

/// Same checks without resolving sample files; paths stay empty.
Manifest load_manifest_labels(const std::filesystem::path& path, int class_count = kDefaultClassCount);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Samples x concatenated category columns.
struct FeatureMatrix {
  std::vector<std::string> sample_ids;
  std::vector<std::string> category_ids;
  std::vector<std::string> column_names;
  Matrix values;

  /// Category owning each column (prefix of the column name up to `_`).
  std::vector<std::string> column_categories() const;

  /// Throws InvariantError if shapes disagree or a value is not finite.
  void validate() const;

  /// Column-wise concatenation; sample ids must match.
  static FeatureMatrix hconcat(std::span<const FeatureMatrix> parts);

  bool operator==(const FeatureMatrix&) const = default;
};

/// Shortest decimal rendering that parses back to the same double.
std::string format_double(double value);

std::string render_features_csv(const FeatureMatrix& matrix);
FeatureMatrix parse_features_csv(std::string_view text);

/// CSV with header `Id,<column names>`. Refuses non-finite values.
void write_features(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix read_features(const std::filesystem::path& path);

/// Writes `<dir>/trainLabels.csv` plus `<Id>.bytes` and `<Id>.asm` for
/// families * per_family samples. Output depends only on the arguments; each
/// family has its own byte bias, opcode mix and section layout.
Manifest generate_synthetic_corpus(const std::filesystem::path& dir, int families, int per_family,
                                   std::uint64_t seed);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace malclass
