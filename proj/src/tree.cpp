#include "malclass/tree.hpp"

#include <cmath>
#include <string>

#include "malclass/errors.hpp"

namespace malclass {

std::size_t DecisionTree::leaf_for(std::span<const double> row) const {
  std::size_t node = 0;
  while (!is_leaf(node)) {
    const Node& n = nodes[node];
    node = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
  }
  return node;
}

void DecisionTree::validate(std::size_t feature_count) const {
  if (nodes.empty()) throw InvariantError("tree has no nodes");
  if (value_width == 0 || values.size() != nodes.size() * value_width)
    throw InvariantError("tree leaf value table has the wrong size");
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    if (n.feature < 0) continue;
    if (static_cast<std::size_t>(n.feature) >= feature_count)
      throw InvariantError("tree node " + std::to_string(i) + " splits on feature " + std::to_string(n.feature) +
                           " of " + std::to_string(feature_count));
    for (int child : {n.left, n.right}) {
      // Children always follow their parent, which rules out cycles.
      if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes.size()))
        throw InvariantError("tree node " + std::to_string(i) + " has an invalid child " + std::to_string(child));
      ++parents[static_cast<std::size_t>(child)];
    }
    if (!std::isfinite(n.threshold)) throw InvariantError("tree node " + std::to_string(i) + " has a non-finite threshold");
  }
  if (parents[0] != 0) throw InvariantError("tree root has a parent");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (parents[i] != 1) throw InvariantError("tree node " + std::to_string(i) + " is not reached exactly once");
}

nlohmann::json tree_to_json(const DecisionTree& tree) {
  nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                 left = nlohmann::json::array(), right = nlohmann::json::array(), gain = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    gain.push_back(n.gain);
  }
  return {{"max_depth", tree.max_depth}, {"value_width", tree.value_width}, {"feature", feature},
          {"threshold", threshold},      {"left", left},                     {"right", right},
          {"gain", gain},                {"values", tree.values}};
}

DecisionTree tree_from_json(const nlohmann::json& j) {
  try {
    DecisionTree tree;
    tree.max_depth = j.at("max_depth").get<int>();
    tree.value_width = j.at("value_width").get<std::size_t>();
    const auto& feature = j.at("feature");
    const auto& threshold = j.at("threshold");
    const auto& left = j.at("left");
    const auto& right = j.at("right");
    const auto& gain = j.at("gain");
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || gain.size() != n)
      throw DataError("tree node arrays differ in length");
    tree.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& node = tree.nodes[i];
      node.feature = feature[i].get<int>();
      node.threshold = threshold[i].get<double>();
      node.left = left[i].get<int>();
      node.right = right[i].get<int>();
      node.gain = gain[i].get<double>();
    }
    tree.values = j.at("values").get<std::vector<double>>();
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed tree: ") + e.what());
  }
}

double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return (mid > lo && mid <= hi) ? mid : hi;
}

}  // namespace malclass
