#include "malclass/bagging.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "malclass/corpus.hpp"
#include "malclass/errors.hpp"
#include "malclass/parallel.hpp"

namespace malclass {

namespace {

constexpr std::uint64_t kResampleStream = 0xBA6;

}  // namespace

Matrix BaggedGbt::predict_proba(const Matrix& X) const {
  if (members.empty()) throw InvariantError("bagged model has no members");
  Matrix mean = members.front().predict_proba(X);
  for (std::size_t b = 1; b < members.size(); ++b) {
    const Matrix p = members[b].predict_proba(X);
    auto out = mean.values();
    const auto in = p.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
  }
  if (members.size() > 1)
    for (double& v : mean.values()) v /= static_cast<double>(members.size());
  return mean;
}

BaggedGbt bagging_train(const Matrix& X, std::span<const int> labels, int class_count, const GbtParams& params,
                        int bags, double alpha, const TrainOptions& options) {
  if (bags < 1) throw UsageError("bag count must be at least 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be a finite value >= 0");
  params.validate();
  if (X.rows() == 0) throw DataError("training set is empty");
  if (labels.size() != X.rows()) throw DataError("label count does not match row count");

  BaggedGbt model;
  model.bags = bags;
  model.alpha = alpha;
  model.seed = params.seed;
  model.members.resize(static_cast<std::size_t>(bags));
  const std::size_t L = X.rows();
  const auto extra = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(L)));

  TrainOptions inner = options;
  parallel_for(model.members.size(), options.workers, [&](std::size_t b) {
    std::vector<std::size_t> rows(L);
    for (std::size_t i = 0; i < L; ++i) rows[i] = i;
    std::mt19937_64 rng(derive_seed(params.seed, kResampleStream, b));
    for (std::size_t i = 0; i < extra; ++i) rows.push_back(static_cast<std::size_t>(rng() % L));
    std::vector<int> bag_labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) bag_labels[i] = labels[rows[i]];
    GbtParams bag_params = params;
    bag_params.seed = params.seed + b;
    model.members[b] = gbt_train(extra == 0 ? X : X.select_rows(rows), bag_labels, class_count, bag_params, inner);
  });
  return model;
}

nlohmann::json bagged_to_json(const BaggedGbt& model) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : model.members) members.push_back(gbt_to_json(m));
  return {{"format_version", kModelFormatVersion},
          {"kind", "bagged_gbt"},
          {"bags", model.bags},
          {"alpha", model.alpha},
          {"seed", model.seed},
          {"members", members}};
}

BaggedGbt bagged_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format version " + j.at("format_version").dump());
    if (j.at("kind").get<std::string>() != "bagged_gbt")
      throw DataError("unexpected model kind " + j.at("kind").dump());
    BaggedGbt model;
    model.bags = j.at("bags").get<int>();
    model.alpha = j.at("alpha").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& m : j.at("members")) model.members.push_back(gbt_from_json(m));
    if (model.members.empty() || model.members.size() != static_cast<std::size_t>(model.bags))
      throw DataError("model lists " + std::to_string(model.members.size()) + " members for " +
                      std::to_string(model.bags) + " bags");
    for (const auto& m : model.members)
      if (m.class_count != model.class_count() || m.feature_count != model.feature_count() ||
          m.feature_names != model.feature_names())
        throw DataError("bagged members disagree on their inputs or classes");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const BaggedGbt& model, const std::filesystem::path& path) {
  write_text_file(path, bagged_to_json(model).dump(1) + "\n");
}

BaggedGbt load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("model file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return bagged_from_json(j);
}

Trainer make_gbt_trainer(const GbtParams& params, int workers) {
  return make_bagged_trainer(params, 1, 0.0, workers);
}

Trainer make_bagged_trainer(const GbtParams& params, int bags, double alpha, int workers) {
  return [params, bags, alpha, workers](const Matrix& X, std::span<const int> labels, int class_count) -> Predictor {
    TrainOptions options;
    options.workers = workers;
    auto model = std::make_shared<const BaggedGbt>(bagging_train(X, labels, class_count, params, bags, alpha, options));
    return [model](const Matrix& Xt) { return model->predict_proba(Xt); };
  };
}

}  // namespace malclass
