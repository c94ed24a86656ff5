#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "malclass/matrix.hpp"
#include "malclass/tree.hpp"

namespace malclass {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;  ///< 0 = grow until pure
  int mtry = 0;       ///< 0 = ceil(sqrt(feature count))
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;
};

/// Gini classification forest on bootstrap samples.
struct RfModel {
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  int class_count = 0;
  std::size_t feature_count = 0;

  /// Mean of per-tree leaf class distributions.
  Matrix predict_proba(const Matrix& X) const;
};

RfModel rf_train(const Matrix& X, std::span<const int> labels, int class_count, const ForestParams& params,
                 int workers = 1);

struct ImportanceReport {
  std::vector<std::string> feature_names;
  /// Non-negative, summing to 1 when the forest has any split.
  std::vector<double> feature_scores;
  struct CategoryScore {
    std::string category;
    std::size_t feature_count = 0;
    double mean_score = 0.0;
  };
  /// Sorted by descending mean score.
  std::vector<CategoryScore> categories;
};

/// Mean decrease in Gini impurity. `feature_categories[f]` names the category
/// of column f; category scores are means over member features.
ImportanceReport rf_importance(const RfModel& model, std::span<const std::string> feature_names,
                               std::span<const std::string> feature_categories);

}  // namespace malclass
