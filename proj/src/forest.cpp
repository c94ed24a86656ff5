#include "malclass/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "malclass/errors.hpp"
#include "malclass/parallel.hpp"

namespace malclass {

namespace {

constexpr double kMinImpurityDecrease = 1e-12;
constexpr std::uint64_t kBootstrapStream = 0xF0;

double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

struct ForestGrower {
  const Matrix& X;
  std::span<const int> labels;
  std::size_t K;
  std::size_t mtry;
  const ForestParams& params;
  double root_weight;
  std::mt19937_64& rng;
  DecisionTree& tree;

  // rows may repeat (bootstrap multiplicity).
  void grow(std::size_t node, std::vector<std::uint32_t> rows, int depth) {
    std::vector<double> counts(K, 0.0);
    for (auto r : rows) counts[static_cast<std::size_t>(labels[r])] += 1.0;
    const auto n = static_cast<double>(rows.size());
    const double impurity = gini(counts, n);
    auto set_leaf = [&] {
      tree.values.resize(tree.nodes.size() * K, 0.0);
      for (std::size_t k = 0; k < K; ++k) tree.values[node * K + k] = counts[k] / n;
    };
    const bool depth_done = params.max_depth > 0 && depth >= params.max_depth;
    if (impurity <= 0.0 || depth_done || rows.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
      set_leaf();
      return;
    }

    // Draw features in random order until mtry of them vary in this node.
    std::vector<std::size_t> order(X.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < order.size() && chosen.size() < mtry; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (order.size() - i));
      std::swap(order[i], order[j]);
      const std::size_t f = order[i];
      const double first = X(rows.front(), f);
      if (std::any_of(rows.begin(), rows.end(), [&](std::uint32_t r) { return X(r, f) != first; }))
        chosen.push_back(f);
    }
    std::sort(chosen.begin(), chosen.end());

    double best_decrease = kMinImpurityDecrease;
    int best_feature = -1;
    double best_threshold = 0.0;
    const auto min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
    std::vector<std::uint32_t> sorted = rows;
    std::vector<double> left(K);
    for (std::size_t f : chosen) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
      std::fill(left.begin(), left.end(), 0.0);
      std::vector<double> right = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto k = static_cast<std::size_t>(labels[sorted[i]]);
        left[k] += 1.0;
        right[k] -= 1.0;
        const double lo = X(sorted[i], f), hi = X(sorted[i + 1], f);
        if (!(lo < hi) || i + 1 < min_leaf || sorted.size() - i - 1 < min_leaf) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double decrease = impurity - (nl / n) * gini(left, nl) - (nr / n) * gini(right, nr);
        if (decrease > best_decrease) {
          best_decrease = decrease;
          best_feature = static_cast<int>(f);
          best_threshold = split_threshold(lo, hi);
        }
      }
    }
    if (best_feature < 0) {
      set_leaf();
      return;
    }

    std::vector<std::uint32_t> left_rows, right_rows;
    for (auto r : rows) (X(r, static_cast<std::size_t>(best_feature)) < best_threshold ? left_rows : right_rows).push_back(r);
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& split = tree.nodes[node];
    split.feature = best_feature;
    split.threshold = best_threshold;
    split.left = left_id;
    split.right = left_id + 1;
    split.gain = (n / root_weight) * best_decrease;
    tree.values.resize(tree.nodes.size() * K, 0.0);
    rows.clear();
    rows.shrink_to_fit();
    grow(static_cast<std::size_t>(left_id), std::move(left_rows), depth + 1);
    grow(static_cast<std::size_t>(left_id + 1), std::move(right_rows), depth + 1);
  }
};

}  // namespace

Matrix RfModel::predict_proba(const Matrix& X) const {
  if (X.cols() != feature_count)
    throw DataError("forest expects " + std::to_string(feature_count) + " feature columns, got " +
                    std::to_string(X.cols()));
  const auto K = static_cast<std::size_t>(class_count);
  Matrix p(X.rows(), K, 0.0);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto out = p.row(r);
    for (const auto& t : trees) {
      const auto leaf = t.leaf_values(t.leaf_for(X.row(r)));
      for (std::size_t k = 0; k < K; ++k) out[k] += leaf[k];
    }
    for (double& v : out) v /= static_cast<double>(trees.size());
  }
  return p;
}

RfModel rf_train(const Matrix& X, std::span<const int> labels, int class_count, const ForestParams& params,
                 int workers) {
  if (X.rows() == 0 || X.cols() == 0) throw DataError("training set is empty");
  if (labels.size() != X.rows()) throw DataError("label count does not match row count");
  if (class_count < 1) throw DataError("class count must be at least 1");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= class_count)
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " is out of range");
  for (double v : X.values())
    if (!std::isfinite(v)) throw DataError("training set contains a non-finite value");
  if (params.n_trees < 1) throw UsageError("forest needs at least one tree");
  if (params.max_depth < 0 || params.mtry < 0 || params.min_samples_leaf < 1)
    throw UsageError("invalid forest parameters");

  const std::size_t F = X.cols();
  const std::size_t mtry =
      params.mtry > 0 ? std::min<std::size_t>(static_cast<std::size_t>(params.mtry), F)
                      : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(F))));

  RfModel model;
  model.class_count = class_count;
  model.feature_count = F;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  model.tree_seeds.resize(model.trees.size());
  for (std::size_t t = 0; t < model.trees.size(); ++t) model.tree_seeds[t] = derive_seed(params.seed, kBootstrapStream, t);

  const std::size_t n = X.rows();
  parallel_for(model.trees.size(), workers, [&](std::size_t t) {
    std::mt19937_64 rng(model.tree_seeds[t]);
    std::vector<std::uint32_t> rows(n);
    for (auto& r : rows) r = static_cast<std::uint32_t>(rng() % n);
    DecisionTree& tree = model.trees[t];
    tree.value_width = static_cast<std::size_t>(class_count);
    tree.max_depth = params.max_depth;
    tree.nodes.emplace_back();
    ForestGrower grower{X, labels, static_cast<std::size_t>(class_count), mtry, params,
                        static_cast<double>(n), rng, tree};
    grower.grow(0, std::move(rows), 0);
  });
  return model;
}

ImportanceReport rf_importance(const RfModel& model, std::span<const std::string> feature_names,
                               std::span<const std::string> feature_categories) {
  const std::size_t F = model.feature_count;
  if (feature_names.size() != F || feature_categories.size() != F)
    throw DataError("importance needs one name and one category per feature (" + std::to_string(F) + ")");
  if (model.trees.empty()) throw InvariantError("forest has no trees");

  ImportanceReport report;
  report.feature_names.assign(feature_names.begin(), feature_names.end());
  report.feature_scores.assign(F, 0.0);
  for (const auto& t : model.trees)
    for (const auto& node : t.nodes)
      if (node.feature >= 0) report.feature_scores[static_cast<std::size_t>(node.feature)] += node.gain;
  for (double& s : report.feature_scores) s /= static_cast<double>(model.trees.size());
  const double total = std::accumulate(report.feature_scores.begin(), report.feature_scores.end(), 0.0);
  if (total > 0.0)
    for (double& s : report.feature_scores) s /= total;

  std::map<std::string, std::pair<std::size_t, double>> by_category;
  for (std::size_t f = 0; f < F; ++f) {
    auto& [count, sum] = by_category[feature_categories[f]];
    ++count;
    sum += report.feature_scores[f];
  }
  for (const auto& [name, acc] : by_category)
    report.categories.push_back({name, acc.first, acc.second / static_cast<double>(acc.first)});
  std::stable_sort(report.categories.begin(), report.categories.end(),
                   [](const auto& a, const auto& b) { return a.mean_score > b.mean_score; });
  return report;
}

}  // namespace malclass
