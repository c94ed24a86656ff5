#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "malclass/eval.hpp"
#include "malclass/matrix.hpp"

namespace malclass {

/// The columns of one feature category for every sample.
struct CategoryBlock {
  std::string id;
  Matrix values;
};

struct FusionOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  /// Minimum logloss improvement to accept another category. Use
  /// -infinity to add every category.
  double epsilon = 1e-4;
  int workers = 1;
};

struct FusionStep {
  std::string added_category;
  std::size_t cumulative_feature_count = 0;
  double cv_accuracy = 0.0;
  double cv_logloss = 0.0;
};

struct FusionReport {
  std::vector<FusionStep> steps;
  /// Step with the lowest cv_logloss.
  std::size_t selected_prefix = 0;
  bool stopped_early = false;
  /// Number of candidate subsets scored by cross-validation.
  std::size_t candidate_evaluations = 0;
};

/// Greedy forward selection over whole categories, minimizing CV logloss.
FusionReport forward_stepwise_fusion(std::span<const CategoryBlock> categories, std::span<const int> labels,
                                     int class_count, const Trainer& trainer, const FusionOptions& options = {});

struct SingletonResult {
  std::string category;
  std::size_t feature_count = 0;
  double cv_accuracy = 0.0;
  double cv_logloss = 0.0;
};

/// Cross-validated score of each category alone, by ascending logloss.
std::vector<SingletonResult> evaluate_category_singletons(std::span<const CategoryBlock> categories,
                                                          std::span<const int> labels, int class_count,
                                                          const Trainer& trainer, const FusionOptions& options = {});

nlohmann::json fusion_to_json(const FusionReport& report);
/// `C1: A`, `C2: C1+B`, ... table of feature counts and CV metrics.
std::string fusion_to_markdown(const FusionReport& report);
std::string singletons_to_markdown(std::span<const SingletonResult> rows);

}  // namespace malclass
