#include "malclass/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "malclass/errors.hpp"
#include "malclass/parallel.hpp"

namespace malclass {

namespace {

// Splits whose loss reduction does not exceed this are treated as noise.
constexpr double kMinSplitGain = 1e-12;
// Single-class training sets push that class to p >= 1 - 1e-6 for K <= 2e3.
constexpr double kSingleClassBias = 22.0;

void check_training_set(const Matrix& X, std::span<const int> labels, int class_count) {
  if (X.rows() == 0 || X.cols() == 0) throw DataError("training set is empty");
  if (labels.size() != X.rows())
    throw DataError("label count " + std::to_string(labels.size()) + " does not match row count " +
                    std::to_string(X.rows()));
  if (class_count < 1) throw DataError("class count must be at least 1");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= class_count)
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " is outside 0.." +
                      std::to_string(class_count - 1));
  for (double v : X.values())
    if (!std::isfinite(v)) throw DataError("training set contains a non-finite value");
}

/// Per-feature row order by ascending value (ties by row index), computed once
/// per training run.
struct SortedColumns {
  std::vector<std::vector<std::uint32_t>> order;
  std::vector<std::vector<double>> values;
  std::vector<std::size_t> varying;  ///< features that are not constant

  explicit SortedColumns(const Matrix& X) : order(X.cols()), values(X.cols()) {
    const std::size_t n = X.rows();
    for (std::size_t f = 0; f < X.cols(); ++f) {
      auto& ord = order[f];
      ord.resize(n);
      std::iota(ord.begin(), ord.end(), 0U);
      std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
      auto& vals = values[f];
      vals.resize(n);
      for (std::size_t i = 0; i < n; ++i) vals[i] = X(ord[i], f);
      if (vals.front() < vals.back()) varying.push_back(f);
    }
  }
};

struct SplitCandidate {
  double gain = kMinSplitGain;
  int feature = -1;
  double threshold = 0.0;
};

double leaf_weight(double g, double h, double lambda) { return h + lambda > 0.0 ? -g / (h + lambda) : 0.0; }

double score(double g, double h, double lambda) { return h + lambda > 0.0 ? g * g / (h + lambda) : 0.0; }

/// Grows one regression tree on (grad, hess) level by level. `in_sample`
/// marks the rows drawn for this tree; `features` is ascending.
DecisionTree grow_boost_tree(const Matrix& X, const SortedColumns& cols, std::span<const double> grad,
                             std::span<const double> hess, std::span<const std::uint8_t> in_sample,
                             std::span<const std::size_t> features, const GbtParams& params) {
  const std::size_t n = X.rows();
  const double lambda = params.lambda;
  DecisionTree tree;
  tree.value_width = 1;
  tree.max_depth = params.max_depth;

  std::vector<int> node_of(n, -1);
  std::vector<double> G(1, 0.0), H(1, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    if (in_sample[r]) {
      node_of[r] = 0;
      G[0] += grad[r];
      H[0] += hess[r];
    }
  tree.nodes.emplace_back();

  std::vector<int> frontier{0};
  for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    std::vector<int> slot_of(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);

    std::vector<SplitCandidate> best(frontier.size());
    std::vector<double> gl(frontier.size()), hl(frontier.size()), last(frontier.size());
    std::vector<std::uint8_t> seen(frontier.size());
    for (std::size_t f : features) {
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      const auto& ord = cols.order[f];
      const auto& vals = cols.values[f];
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t r = ord[i];
        const int node = node_of[r];
        if (node < 0) continue;
        const int slot = slot_of[static_cast<std::size_t>(node)];
        if (slot < 0) continue;
        const auto s = static_cast<std::size_t>(slot);
        const double x = vals[i];
        if (seen[s] && x > last[s]) {
          const double GL = gl[s], HL = hl[s];
          const double GR = G[static_cast<std::size_t>(node)] - GL, HR = H[static_cast<std::size_t>(node)] - HL;
          if (HL >= params.min_child_weight && HR >= params.min_child_weight) {
            const double gain = 0.5 * (score(GL, HL, lambda) + score(GR, HR, lambda) -
                                       score(GL + GR, HL + HR, lambda));
            if (gain > best[s].gain) best[s] = {gain, static_cast<int>(f), split_threshold(last[s], x)};
          }
        }
        gl[s] += grad[r];
        hl[s] += hess[r];
        last[s] = x;
        seen[s] = 1;
      }
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      if (best[s].feature < 0) continue;
      const auto node = static_cast<std::size_t>(frontier[s]);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes[node].feature = best[s].feature;
      tree.nodes[node].threshold = best[s].threshold;
      tree.nodes[node].gain = best[s].gain;
      tree.nodes[node].left = left;
      tree.nodes[node].right = left + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      G.resize(tree.nodes.size(), 0.0);
      H.resize(tree.nodes.size(), 0.0);
      next.push_back(left);
      next.push_back(left + 1);
    }
    if (next.empty()) break;
    for (std::size_t r = 0; r < n; ++r) {
      const int node = node_of[r];
      if (node < 0 || tree.is_leaf(static_cast<std::size_t>(node)) ||
          slot_of.size() <= static_cast<std::size_t>(node) || slot_of[static_cast<std::size_t>(node)] < 0)
        continue;
      const auto& split = tree.nodes[static_cast<std::size_t>(node)];
      const int child = X(r, static_cast<std::size_t>(split.feature)) < split.threshold ? split.left : split.right;
      node_of[r] = child;
      G[static_cast<std::size_t>(child)] += grad[r];
      H[static_cast<std::size_t>(child)] += hess[r];
    }
    frontier = std::move(next);
  }

  tree.values.assign(tree.nodes.size(), 0.0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (tree.is_leaf(i)) tree.values[i] = leaf_weight(G[i], H[i], lambda);
  return tree;
}

/// Draws `count` distinct indices from [0, n) and returns them ascending.
std::vector<std::size_t> draw_subset(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t scaled_count(std::size_t n, double fraction) {
  if (fraction >= 1.0) return n;
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
}

}  // namespace

void GbtParams::validate() const {
  if (rounds < 0) throw UsageError("rounds must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw UsageError("learning rate must lie in (0, 1]");
  if (max_depth < 0) throw UsageError("max depth must be >= 0");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
  if (!(min_child_weight >= 0.0)) throw UsageError("min child weight must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw UsageError("subsample must lie in (0, 1]");
  if (!(colsample > 0.0 && colsample <= 1.0)) throw UsageError("colsample must lie in (0, 1]");
}

std::pair<std::vector<double>, std::vector<double>> gbt_grad_hess(std::span<const double> probabilities,
                                                                  int true_class) {
  std::vector<double> g(probabilities.size()), h(probabilities.size());
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    const double p = probabilities[k];
    g[k] = p - (static_cast<int>(k) == true_class ? 1.0 : 0.0);
    h[k] = p * (1.0 - p);
  }
  return {std::move(g), std::move(h)};
}

void softmax_inplace(std::span<double> margins) {
  if (margins.empty()) return;
  const double top = *std::max_element(margins.begin(), margins.end());
  double sum = 0.0;
  for (double& m : margins) {
    m = std::exp(m - top);
    sum += m;
  }
  for (double& m : margins) m = std::max(m / sum, std::numeric_limits<double>::min());
}

Matrix GbtModel::predict_margin(const Matrix& X, std::optional<int> round_limit) const {
  if (X.cols() != feature_count)
    throw DataError("model expects " + std::to_string(feature_count) + " feature columns, got " +
                    std::to_string(X.cols()));
  const int limit = std::clamp(round_limit.value_or(rounds()), 0, rounds());
  const auto K = static_cast<std::size_t>(class_count);
  Matrix margins(X.rows(), K, base_score);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto m = margins.row(r);
    const auto row = X.row(r);
    for (std::size_t k = 0; k < K; ++k) m[k] += class_bias.empty() ? 0.0 : class_bias[k];
    for (int t = 0; t < limit; ++t)
      for (std::size_t k = 0; k < K; ++k) {
        const DecisionTree& tree = trees[static_cast<std::size_t>(t) * K + k];
        m[k] += params.learning_rate * tree.values[tree.leaf_for(row)];
      }
  }
  return margins;
}

Matrix GbtModel::predict_proba(const Matrix& X, std::optional<int> round_limit) const {
  Matrix p = predict_margin(X, round_limit);
  for (std::size_t r = 0; r < p.rows(); ++r) softmax_inplace(p.row(r));
  return p;
}

GbtModel gbt_train(const Matrix& X, std::span<const int> labels, int class_count, const GbtParams& params,
                   const TrainOptions& options) {
  params.validate();
  check_training_set(X, labels, class_count);
  if (!options.feature_names.empty() && options.feature_names.size() != X.cols())
    throw DataError("feature name count " + std::to_string(options.feature_names.size()) +
                    " does not match column count " + std::to_string(X.cols()));

  GbtModel model;
  model.params = params;
  model.class_count = class_count;
  model.feature_count = X.cols();
  model.feature_names = options.feature_names;
  model.class_bias.assign(static_cast<std::size_t>(class_count), 0.0);

  const std::size_t n = X.rows();
  const auto K = static_cast<std::size_t>(class_count);
  const bool single_class =
      std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); });
  if (single_class) {
    // Nothing to separate: a fixed bias pins the one observed class and every
    // tree is a zero leaf, which keeps |trees| = rounds * K.
    if (K > 1) model.class_bias[static_cast<std::size_t>(labels.front())] = kSingleClassBias;
    DecisionTree stump;
    stump.nodes.emplace_back();
    stump.values.assign(1, 0.0);
    stump.max_depth = params.max_depth;
    model.trees.assign(static_cast<std::size_t>(params.rounds) * K, stump);
    return model;
  }

  const SortedColumns cols(X);
  Matrix margins(n, K, model.base_score);
  Matrix prob(n, K);
  model.trees.reserve(static_cast<std::size_t>(params.rounds) * K);

  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      auto p = prob.row(r);
      const auto m = margins.row(r);
      std::copy(m.begin(), m.end(), p.begin());
      softmax_inplace(p);
    }
    std::vector<DecisionTree> round_trees(K);
    parallel_for(K, options.workers, [&](std::size_t k) {
      std::mt19937_64 rng(derive_seed(params.seed, static_cast<std::uint64_t>(round), k));
      std::vector<std::uint8_t> in_sample(n, 1);
      if (params.subsample < 1.0) {
        std::fill(in_sample.begin(), in_sample.end(), 0);
        for (std::size_t r : draw_subset(n, scaled_count(n, params.subsample), rng)) in_sample[r] = 1;
      }
      std::vector<std::size_t> features = cols.varying;
      if (params.colsample < 1.0 && !features.empty()) {
        std::vector<std::size_t> picked;
        for (std::size_t i : draw_subset(features.size(), scaled_count(features.size(), params.colsample), rng))
          picked.push_back(features[i]);
        features = std::move(picked);
      }
      std::vector<double> g(n), h(n);
      for (std::size_t r = 0; r < n; ++r) {
        const double p = prob(r, k);
        g[r] = p - (labels[r] == static_cast<int>(k) ? 1.0 : 0.0);
        h[r] = p * (1.0 - p);
      }
      round_trees[k] = grow_boost_tree(X, cols, g, h, in_sample, features, params);
    });
    for (std::size_t r = 0; r < n; ++r) {
      auto m = margins.row(r);
      const auto row = X.row(r);
      for (std::size_t k = 0; k < K; ++k)
        m[k] += params.learning_rate * round_trees[k].values[round_trees[k].leaf_for(row)];
    }
    for (auto& t : round_trees) model.trees.push_back(std::move(t));
  }
  return model;
}

nlohmann::json gbt_to_json(const GbtModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) trees.push_back(tree_to_json(t));
  const auto& p = model.params;
  return {{"format_version", kModelFormatVersion},
          {"kind", "gbt"},
          {"params",
           {{"rounds", p.rounds},
            {"learning_rate", p.learning_rate},
            {"max_depth", p.max_depth},
            {"lambda", p.lambda},
            {"min_child_weight", p.min_child_weight},
            {"subsample", p.subsample},
            {"colsample", p.colsample},
            {"seed", p.seed}}},
          {"class_count", model.class_count},
          {"feature_count", model.feature_count},
          {"base_score", model.base_score},
          {"class_bias", model.class_bias},
          {"feature_names", model.feature_names},
          {"trees", trees}};
}

GbtModel gbt_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format version " + j.at("format_version").dump());
    GbtModel model;
    const auto& p = j.at("params");
    model.params.rounds = p.at("rounds").get<int>();
    model.params.learning_rate = p.at("learning_rate").get<double>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.lambda = p.at("lambda").get<double>();
    model.params.min_child_weight = p.at("min_child_weight").get<double>();
    model.params.subsample = p.at("subsample").get<double>();
    model.params.colsample = p.at("colsample").get<double>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    model.class_count = j.at("class_count").get<int>();
    model.feature_count = j.at("feature_count").get<std::size_t>();
    model.base_score = j.at("base_score").get<double>();
    model.class_bias = j.at("class_bias").get<std::vector<double>>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& t : j.at("trees")) model.trees.push_back(tree_from_json(t));

    if (model.class_count < 1) throw DataError("model class count must be at least 1");
    if (model.class_bias.size() != static_cast<std::size_t>(model.class_count))
      throw DataError("model class bias has the wrong length");
    if (model.trees.size() != static_cast<std::size_t>(model.params.rounds) * static_cast<std::size_t>(model.class_count))
      throw DataError("model holds " + std::to_string(model.trees.size()) + " trees, expected rounds * classes");
    if (!model.feature_names.empty() && model.feature_names.size() != model.feature_count)
      throw DataError("model feature names do not match its feature count");
    for (const auto& t : model.trees) t.validate(model.feature_count);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  } catch (const InvariantError& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

}  // namespace malclass
