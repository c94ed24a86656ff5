#include "malclass/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "malclass/errors.hpp"
#include "malclass/parallel.hpp"

namespace malclass {

namespace {

constexpr double kRowSumTolerance = 1e-6;
constexpr std::uint64_t kFoldStream = 0xF01D;

void check_predictions(const Matrix& probabilities, std::span<const int> labels) {
  if (probabilities.rows() == 0) throw DataError("no predictions to score");
  if (labels.size() != probabilities.rows())
    throw DataError("label count " + std::to_string(labels.size()) + " does not match prediction rows " +
                    std::to_string(probabilities.rows()));
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    const auto row = probabilities.row(i);
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (!(std::abs(sum - 1.0) <= kRowSumTolerance))
      throw DataError("prediction row " + std::to_string(i) + " sums to " + std::to_string(sum) + ", not 1");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= probabilities.cols())
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " is out of range");
  }
}

// Re-raises an exception with the fold index prepended, keeping its kind.
[[noreturn]] void rethrow_with_fold(std::size_t fold) {
  const std::string prefix = "fold " + std::to_string(fold) + ": ";
  try {
    throw;
  } catch (const UsageError& e) {
    throw UsageError(prefix + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(prefix + e.what());
  } catch (const std::exception& e) {
    throw DataError(prefix + e.what());
  }
}

}  // namespace

double logloss(const Matrix& probabilities, std::span<const int> labels) {
  check_predictions(probabilities, labels);
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    const double p = std::clamp(probabilities(i, static_cast<std::size_t>(labels[i])), kProbabilityClip,
                                1.0 - kProbabilityClip);
    sum += std::log(p);
  }
  return -sum / static_cast<double>(probabilities.rows());
}

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

double accuracy(const Matrix& probabilities, std::span<const int> labels) {
  check_predictions(probabilities, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probabilities.rows(); ++i)
    if (argmax_row(probabilities.row(i)) == static_cast<std::size_t>(labels[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(probabilities.rows());
}

EvalResult evaluate_predictions(const Matrix& probabilities, std::span<const int> labels, int class_count) {
  if (class_count < 1 || probabilities.cols() != static_cast<std::size_t>(class_count))
    throw DataError("predictions have " + std::to_string(probabilities.cols()) + " columns, expected " +
                    std::to_string(class_count));
  EvalResult result;
  result.logloss = logloss(probabilities, labels);
  result.accuracy = accuracy(probabilities, labels);
  const auto K = static_cast<std::size_t>(class_count);
  result.confusion.assign(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < probabilities.rows(); ++i)
    ++result.confusion[static_cast<std::size_t>(labels[i])][argmax_row(probabilities.row(i))];
  result.normalized_confusion.assign(K, std::vector<double>(K, 0.0));
  for (std::size_t t = 0; t < K; ++t) {
    const std::size_t total = std::accumulate(result.confusion[t].begin(), result.confusion[t].end(), std::size_t{0});
    if (total == 0) continue;
    for (std::size_t p = 0; p < K; ++p)
      result.normalized_confusion[t][p] = static_cast<double>(result.confusion[t][p]) / static_cast<double>(total);
  }
  return result;
}

std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, int class_count, int k,
                                                       std::uint64_t seed) {
  if (k < 2) throw UsageError("fold count must be at least 2");
  if (labels.size() < static_cast<std::size_t>(k))
    throw DataError("cannot split " + std::to_string(labels.size()) + " samples into " + std::to_string(k) +
                    " folds");
  if (class_count < 1) throw DataError("class count must be at least 1");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count)
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " is out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  const auto K = static_cast<std::size_t>(k);
  std::vector<std::vector<std::size_t>> folds(K);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) throw DataError("class " + std::to_string(c) + " has no samples");
    std::mt19937_64 rng(derive_seed(seed, kFoldStream, c));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng() % i]);
    // Rotating the starting fold keeps overall fold sizes balanced too.
    for (std::size_t i = 0; i < members.size(); ++i) folds[(offset + i) % K].push_back(members[i]);
    offset = (offset + members.size()) % K;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

EvalResult cross_validate(const Matrix& X, std::span<const int> labels, int class_count, const Trainer& trainer,
                          int k, std::uint64_t seed, int workers) {
  return cross_validate(X, labels, class_count, trainer, stratified_kfold(labels, class_count, k, seed), workers);
}

EvalResult cross_validate(const Matrix& X, std::span<const int> labels, int class_count, const Trainer& trainer,
                          const std::vector<std::vector<std::size_t>>& folds, int workers) {
  const std::size_t n = X.rows();
  if (labels.size() != n) throw DataError("label count does not match row count");
  std::vector<int> owner(n, -1);
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (std::size_t r : folds[f]) {
      if (r >= n || owner[r] != -1) throw DataError("folds do not partition the rows");
      owner[r] = static_cast<int>(f);
    }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) throw DataError("folds do not cover every row");

  const auto K = static_cast<std::size_t>(class_count);
  Matrix pooled(n, K);
  std::vector<FoldMetrics> metrics(folds.size());
  parallel_for(folds.size(), workers, [&](std::size_t f) {
    try {
      std::vector<std::size_t> train_rows;
      std::vector<int> train_labels;
      for (std::size_t r = 0; r < n; ++r)
        if (owner[r] != static_cast<int>(f)) {
          train_rows.push_back(r);
          train_labels.push_back(labels[r]);
        }
      const Predictor predict = trainer(X.select_rows(train_rows), train_labels, class_count);
      const Matrix held_out = X.select_rows(folds[f]);
      const Matrix p = predict(held_out);
      if (p.rows() != folds[f].size() || p.cols() != K) throw DataError("predictor returned the wrong shape");
      std::vector<int> fold_labels;
      for (std::size_t i = 0; i < folds[f].size(); ++i) {
        std::copy(p.row(i).begin(), p.row(i).end(), pooled.row(folds[f][i]).begin());
        fold_labels.push_back(labels[folds[f][i]]);
      }
      metrics[f] = {f, folds[f].size(), accuracy(p, fold_labels), logloss(p, fold_labels)};
    } catch (...) {
      rethrow_with_fold(f);
    }
  });

  EvalResult result = evaluate_predictions(pooled, labels, class_count);
  result.folds = std::move(metrics);
  result.probabilities = std::move(pooled);
  return result;
}

nlohmann::json eval_to_json(const EvalResult& result) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : result.folds)
    folds.push_back({{"fold", f.fold}, {"size", f.size}, {"accuracy", f.accuracy}, {"logloss", f.logloss}});
  return {{"accuracy", result.accuracy},
          {"logloss", result.logloss},
          {"confusion", result.confusion},
          {"normalized_confusion", result.normalized_confusion},
          {"folds", folds}};
}

std::string confusion_heatmap_pgm(const EvalResult& result, int cell_pixels) {
  if (cell_pixels < 1) throw UsageError("heatmap cell size must be positive");
  const std::size_t K = result.normalized_confusion.size();
  const std::size_t side = K * static_cast<std::size_t>(cell_pixels);
  std::ostringstream out;
  out << "P2\n" << side << ' ' << side << "\n255\n";
  for (std::size_t y = 0; y < side; ++y) {
    const std::size_t t = y / static_cast<std::size_t>(cell_pixels);
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t p = x / static_cast<std::size_t>(cell_pixels);
      // Dark cells are frequent outcomes.
      const auto level = static_cast<int>(std::lround(255.0 * (1.0 - result.normalized_confusion[t][p])));
      out << level << (x + 1 == side ? '\n' : ' ');
    }
  }
  return out.str();
}

}  // namespace malclass
