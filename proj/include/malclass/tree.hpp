#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace malclass {

/// Binary decision tree stored as flat arrays. Internal nodes send a row left
/// when `row[feature] < threshold`. Leaves carry `value_width` numbers each:
/// one weight for boosting trees, a class distribution for forest trees.
struct DecisionTree {
  struct Node {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    /// Split quality: loss reduction (boosting) or weighted impurity
    /// decrease (forest). 0 for leaves.
    double gain = 0.0;

    bool operator==(const Node&) const = default;
  };

  std::vector<Node> nodes;
  std::size_t value_width = 1;
  /// nodes.size() * value_width entries; meaningful at leaves.
  std::vector<double> values;
  int max_depth = 0;

  bool is_leaf(std::size_t node) const { return nodes[node].feature < 0; }
  std::size_t leaf_for(std::span<const double> row) const;
  std::span<const double> leaf_values(std::size_t node) const {
    return {values.data() + node * value_width, value_width};
  }
  /// Throws InvariantError on dangling children or cycles.
  void validate(std::size_t feature_count) const;

  bool operator==(const DecisionTree&) const = default;
};

nlohmann::json tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& j);

/// Threshold strictly above `lo` and at most `hi` (lo < hi), near the midpoint.
double split_threshold(double lo, double hi);

}  // namespace malclass
