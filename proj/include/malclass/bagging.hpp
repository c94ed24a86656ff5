#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "malclass/eval.hpp"
#include "malclass/gbt.hpp"

namespace malclass {

/// Boosted models trained on (1 + alpha) * L resamples; predictions averaged.
struct BaggedGbt {
  int bags = 1;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::vector<GbtModel> members;

  int class_count() const { return members.empty() ? 0 : members.front().class_count; }
  std::size_t feature_count() const { return members.empty() ? 0 : members.front().feature_count; }
  const std::vector<std::string>& feature_names() const { return members.front().feature_names; }

  Matrix predict_proba(const Matrix& X) const;

  bool operator==(const BaggedGbt&) const = default;
};

/// Bag b trains on all L rows plus floor(alpha * L) rows drawn with
/// replacement; its booster uses seed params.seed + b.
BaggedGbt bagging_train(const Matrix& X, std::span<const int> labels, int class_count, const GbtParams& params,
                        int bags = 8, double alpha = 1.0, const TrainOptions& options = {});

nlohmann::json bagged_to_json(const BaggedGbt& model);
BaggedGbt bagged_from_json(const nlohmann::json& j);

void save_model(const BaggedGbt& model, const std::filesystem::path& path);
BaggedGbt load_model(const std::filesystem::path& path);

Trainer make_gbt_trainer(const GbtParams& params, int workers = 1);
Trainer make_bagged_trainer(const GbtParams& params, int bags, double alpha, int workers = 1);

}  // namespace malclass
