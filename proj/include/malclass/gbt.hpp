#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "malclass/matrix.hpp"
#include "malclass/tree.hpp"

namespace malclass {

inline constexpr int kModelFormatVersion = 1;

struct GbtParams {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 6;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  double subsample = 1.0;
  double colsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const GbtParams&) const = default;
};

/// Softmax gradient boosting: one regression tree per class per round.
struct GbtModel {
  GbtParams params;
  int class_count = 0;
  std::size_t feature_count = 0;
  double base_score = 0.0;
  /// Per-class starting margin; zero except for single-class training sets.
  std::vector<double> class_bias;
  std::vector<std::string> feature_names;
  /// Index round * class_count + class.
  std::vector<DecisionTree> trees;

  int rounds() const { return class_count == 0 ? 0 : static_cast<int>(trees.size()) / class_count; }

  /// Raw scores; `round_limit` uses only the first rounds.
  Matrix predict_margin(const Matrix& X, std::optional<int> round_limit = std::nullopt) const;
  /// Row-stochastic class probabilities, every entry > 0.
  Matrix predict_proba(const Matrix& X, std::optional<int> round_limit = std::nullopt) const;

  bool operator==(const GbtModel&) const = default;
};

/// Gradient and hessian of the softmax cross-entropy w.r.t. the margins.
std::pair<std::vector<double>, std::vector<double>> gbt_grad_hess(std::span<const double> probabilities,
                                                                  int true_class);

/// Numerically stable softmax of one row of margins, entries floored above 0.
void softmax_inplace(std::span<double> margins);

struct TrainOptions {
  int workers = 1;
  std::vector<std::string> feature_names;
};

/// Exact greedy second-order boosting. Throws DataError on an empty or
/// inconsistent training set.
GbtModel gbt_train(const Matrix& X, std::span<const int> labels, int class_count, const GbtParams& params,
                   const TrainOptions& options = {});

nlohmann::json gbt_to_json(const GbtModel& model);
GbtModel gbt_from_json(const nlohmann::json& j);

}  // namespace malclass
