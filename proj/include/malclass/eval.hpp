#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "malclass/matrix.hpp"

namespace malclass {

inline constexpr double kProbabilityClip = 1e-15;

/// Multi-class cross-entropy with probabilities clipped to [1e-15, 1-1e-15].
/// Throws DataError for N = 0 or a row not summing to 1 within 1e-6.
double logloss(const Matrix& probabilities, std::span<const int> labels);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Matrix& probabilities, std::span<const int> labels);

std::size_t argmax_row(std::span<const double> row);

struct FoldMetrics {
  std::size_t fold = 0;
  std::size_t size = 0;
  double accuracy = 0.0;
  double logloss = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  double logloss = 0.0;
  /// confusion[true][predicted].
  std::vector<std::vector<std::size_t>> confusion;
  /// Rows divided by their totals; all-zero for classes with no sample.
  std::vector<std::vector<double>> normalized_confusion;
  std::vector<FoldMetrics> folds;
  /// Pooled out-of-fold probabilities (cross-validation only).
  Matrix probabilities;
};

EvalResult evaluate_predictions(const Matrix& probabilities, std::span<const int> labels, int class_count);

/// Stratified k-fold split. Each fold lists sorted row indices; per-class
/// counts across folds differ by at most one.
std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, int class_count, int k,
                                                       std::uint64_t seed);

using Predictor = std::function<Matrix(const Matrix& X)>;
using Trainer = std::function<Predictor(const Matrix& X, std::span<const int> labels, int class_count)>;

/// Trains on k-1 folds, scores the held-out fold, and pools the held-out
/// probabilities. Trainer failures are rethrown as DataError naming the fold.
EvalResult cross_validate(const Matrix& X, std::span<const int> labels, int class_count, const Trainer& trainer,
                          int k, std::uint64_t seed, int workers = 1);

EvalResult cross_validate(const Matrix& X, std::span<const int> labels, int class_count, const Trainer& trainer,
                          const std::vector<std::vector<std::size_t>>& folds, int workers = 1);

nlohmann::json eval_to_json(const EvalResult& result);

/// Grayscale PGM heatmap of the normalized confusion matrix.
std::string confusion_heatmap_pgm(const EvalResult& result, int cell_pixels = 24);

}  // namespace malclass
