#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "malclass/errors.hpp"
#include "malclass/eval.hpp"
#include "test_support.hpp"

using namespace malclass;

namespace {

Matrix uniform(std::size_t n, std::size_t k) { return Matrix(n, k, 1.0 / static_cast<double>(k)); }

Matrix one_hot(std::span<const int> labels, std::size_t k) {
  Matrix p(labels.size(), k);
  for (std::size_t i = 0; i < labels.size(); ++i) p(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return p;
}

std::vector<int> balanced_labels(int classes, int per_class) {
  std::vector<int> y;
  for (int i = 0; i < per_class; ++i)
    for (int c = 0; c < classes; ++c) y.push_back(c);
  return y;
}

Trainer uniform_trainer() {
  return [](const Matrix&, std::span<const int>, int k) -> Predictor {
    return [k](const Matrix& X) { return uniform(X.rows(), static_cast<std::size_t>(k)); };
  };
}

// Memorizing 1-nearest-neighbour classifier with a little smoothing.
Trainer nearest_neighbour_trainer() {
  return [](const Matrix& X, std::span<const int> labels, int k) -> Predictor {
    std::vector<int> y(labels.begin(), labels.end());
    return [X, y, k](const Matrix& Q) {
      Matrix p(Q.rows(), static_cast<std::size_t>(k), 0.01 / k);
      for (std::size_t q = 0; q < Q.rows(); ++q) {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t r = 0; r < X.rows(); ++r) {
          double d = 0.0;
          for (std::size_t j = 0; j < X.cols(); ++j) d += (X(r, j) - Q(q, j)) * (X(r, j) - Q(q, j));
          if (d < best_d) {
            best_d = d;
            best = r;
          }
        }
        p(q, static_cast<std::size_t>(y[best])) += 0.99;
      }
      return p;
    };
  };
}

Matrix clustered(std::span<const int> y, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  Matrix X(y.size(), static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j)
      X(i, j) = noise(rng) + (static_cast<int>(j) == y[i] ? 2.0 : 0.0);
  return X;
}

}  // namespace

TEST(Logloss, ClosedForms) {
  const auto y = balanced_labels(9, 3);
  EXPECT_NEAR(logloss(uniform(y.size(), 9), y), std::log(9.0), 1e-12);
  EXPECT_NEAR(logloss(uniform(y.size(), 9), y), 2.1972246, 1e-7);
  EXPECT_LE(logloss(one_hot(y, 9), y), 1e-14);

  Matrix p(2, 2);
  p(0, 0) = 0.8;
  p(0, 1) = 0.2;
  p(1, 0) = 0.6;
  p(1, 1) = 0.4;
  const std::vector<int> labels = {0, 1};
  const double oracle = -(std::log(0.8) + std::log(0.4)) / 2.0;
  EXPECT_NEAR(logloss(p, labels), oracle, 1e-15);
  EXPECT_NEAR(logloss(p, labels), 0.569717, 1e-6);
}

TEST(Logloss, ClippingBound) {
  const std::vector<int> y = {0, 1, 2};
  const std::vector<int> wrong = {1, 2, 0};
  const double ll = logloss(one_hot(y, 3), wrong);
  EXPECT_NEAR(ll, -std::log(1e-15), 1e-9);
  EXPECT_LE(ll, 34.54);
}

TEST(Logloss, StrictlyDecreasesInTrueClassProbability) {
  const std::vector<int> y = {1, 0};
  double prev = INFINITY;
  for (double q = 0.05; q < 1.0; q += 0.05) {
    Matrix p(2, 2, 0.5);
    p(0, 1) = q;
    p(0, 0) = 1.0 - q;
    const double ll = logloss(p, y);
    EXPECT_LT(ll, prev);
    prev = ll;
  }
}

TEST(Logloss, Rejections) {
  EXPECT_THROW(logloss(Matrix(0, 3), std::vector<int>{}), DataError);
  Matrix p = uniform(3, 3);
  p(1, 0) += 0.01;
  try {
    logloss(p, std::vector<int>{0, 0, 0});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
  EXPECT_THROW(logloss(uniform(2, 3), std::vector<int>{0}), DataError);
  EXPECT_THROW(logloss(uniform(2, 3), std::vector<int>{0, 3}), DataError);
  Matrix nearly = uniform(1, 2);
  nearly(0, 0) += 5e-7;
  EXPECT_NO_THROW(logloss(nearly, std::vector<int>{0}));
}

TEST(Accuracy, CountsAndTies) {
  const std::vector<int> y = {0, 1, 2, 1};
  EXPECT_EQ(accuracy(one_hot(y, 3), y), 1.0);
  EXPECT_EQ(accuracy(one_hot(y, 3), std::vector<int>{1, 2, 0, 0}), 0.0);
  EXPECT_EQ(accuracy(one_hot(y, 3), std::vector<int>{0, 1, 2, 2}), 0.75);
  // Uniform rows predict class 0.
  EXPECT_EQ(accuracy(uniform(4, 3), std::vector<int>{0, 0, 1, 2}), 0.5);
  const std::vector<double> tie = {0.2, 0.4, 0.4};
  EXPECT_EQ(argmax_row(tie), 1u);
}

TEST(EvaluatePredictions, ConfusionMatchesAccuracy) {
  std::mt19937_64 rng(4);
  const auto y = balanced_labels(4, 10);
  Matrix p(y.size(), 4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double& v : p.row(r)) s += (v = u(rng));
    for (double& v : p.row(r)) v /= s;
  }
  const auto res = evaluate_predictions(p, y, 4);
  std::size_t trace = 0, total = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    trace += res.confusion[t][t];
    total += std::accumulate(res.confusion[t].begin(), res.confusion[t].end(), std::size_t{0});
    EXPECT_NEAR(std::accumulate(res.normalized_confusion[t].begin(), res.normalized_confusion[t].end(), 0.0), 1.0,
                1e-12);
  }
  EXPECT_EQ(total, y.size());
  EXPECT_DOUBLE_EQ(static_cast<double>(trace) / static_cast<double>(total), res.accuracy);
  EXPECT_THROW(evaluate_predictions(p, y, 5), DataError);
}

TEST(EvaluatePredictions, HeatmapIsPgm) {
  const std::vector<int> y = {0, 1, 1};
  const auto res = evaluate_predictions(one_hot(std::vector<int>{0, 1, 0}, 2), y, 2);
  const auto pgm = confusion_heatmap_pgm(res, 2);
  EXPECT_EQ(pgm.substr(0, 11), "P2\n4 4\n255\n");
  // Row 0 is all correct: dark on the diagonal, white off it.
  EXPECT_EQ(pgm.substr(11, 12), "0 0 255 255\n");
  EXPECT_THROW(confusion_heatmap_pgm(res, 0), UsageError);
  const auto j = eval_to_json(res);
  EXPECT_EQ(j.at("confusion")[1][0].get<int>(), 1);
}

TEST(StratifiedKfold, DivisibleCase) {
  const auto y = balanced_labels(9, 10);
  const auto folds = stratified_kfold(y, 9, 5, 3);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen(y.size(), 0);
  for (const auto& f : folds) {
    EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
    std::vector<int> per_class(9, 0);
    for (auto r : f) {
      ++seen[r];
      ++per_class[static_cast<std::size_t>(y[r])];
    }
    EXPECT_EQ(per_class, std::vector<int>(9, 2));
  }
  EXPECT_EQ(seen, std::vector<int>(y.size(), 1));
  EXPECT_EQ(folds, stratified_kfold(y, 9, 5, 3));
  EXPECT_NE(folds, stratified_kfold(y, 9, 5, 4));
}

TEST(StratifiedKfold, MinorityClassAndBalance) {
  std::vector<int> y(42, 1);
  y.insert(y.end(), 137, 0);
  y.insert(y.end(), 23, 2);
  std::mt19937_64 rng(8);
  std::shuffle(y.begin(), y.end(), rng);
  const auto folds = stratified_kfold(y, 3, 5, 0);
  std::vector<std::size_t> sizes;
  std::set<std::size_t> all;
  for (const auto& f : folds) {
    std::vector<int> per_class(3, 0);
    for (auto r : f) {
      ++per_class[static_cast<std::size_t>(y[r])];
      EXPECT_TRUE(all.insert(r).second);
    }
    EXPECT_TRUE(per_class[1] == 8 || per_class[1] == 9);
    EXPECT_TRUE(per_class[0] == 27 || per_class[0] == 28);
    sizes.push_back(f.size());
  }
  EXPECT_EQ(all.size(), y.size());
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  EXPECT_LE(*hi - *lo, 1u);
}

TEST(StratifiedKfold, Rejections) {
  EXPECT_THROW(stratified_kfold(std::vector<int>{0, 0, 2, 2}, 3, 2, 0), DataError);
  EXPECT_THROW(stratified_kfold(std::vector<int>{0, 1, 0, 1}, 2, 1, 0), UsageError);
  EXPECT_THROW(stratified_kfold(std::vector<int>{0, 1, 0}, 2, 5, 0), DataError);
}

TEST(CrossValidate, UniformPredictor) {
  const auto y = balanced_labels(9, 10);
  Matrix X(y.size(), 2, 1.0);
  const auto res = cross_validate(X, y, 9, uniform_trainer(), 5, 0);
  EXPECT_NEAR(res.logloss, std::log(9.0), 1e-12);
  ASSERT_EQ(res.folds.size(), 5u);
  for (const auto& f : res.folds) EXPECT_EQ(f.size, 18u);
  EXPECT_EQ(res.probabilities.rows(), y.size());
}

TEST(CrossValidate, NearestNeighbourOnSeparableData) {
  const auto y = balanced_labels(9, 10);
  const auto X = clustered(y, 9, 6);
  const auto res = cross_validate(X, y, 9, nearest_neighbour_trainer(), 5, 1, 4);
  EXPECT_GE(res.accuracy, 0.95);
  const auto serial = cross_validate(X, y, 9, nearest_neighbour_trainer(), 5, 1, 1);
  EXPECT_EQ(res.probabilities, serial.probabilities);
}

TEST(CrossValidate, HeldOutRowsNeverSeenInTraining) {
  const auto y = balanced_labels(3, 10);
  Matrix X(y.size(), 1);
  for (std::size_t i = 0; i < y.size(); ++i) X(i, 0) = static_cast<double>(i);
  Trainer spy = [](const Matrix& train, std::span<const int>, int k) -> Predictor {
    std::set<double> ids;
    for (std::size_t r = 0; r < train.rows(); ++r) ids.insert(train(r, 0));
    return [ids, k](const Matrix& Q) {
      for (std::size_t r = 0; r < Q.rows(); ++r)
        if (ids.count(Q(r, 0))) throw InvariantError("leak");
      return uniform(Q.rows(), static_cast<std::size_t>(k));
    };
  };
  EXPECT_NO_THROW(cross_validate(X, y, 3, spy, 5, 2));
}

TEST(CrossValidate, PermutationInvariance) {
  const auto y = balanced_labels(3, 12);
  const auto X = clustered(y, 3, 9);
  const auto folds = stratified_kfold(y, 3, 4, 5);
  const auto base = cross_validate(X, y, 3, nearest_neighbour_trainer(), folds);

  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> where(y.size());
  for (std::size_t i = 0; i < perm.size(); ++i) where[perm[i]] = i;
  std::vector<int> y2(y.size());
  for (std::size_t i = 0; i < perm.size(); ++i) y2[i] = y[perm[i]];
  auto folds2 = folds;
  for (auto& f : folds2) {
    for (auto& r : f) r = where[r];
    std::sort(f.begin(), f.end());
  }
  const auto moved = cross_validate(X.select_rows(perm), y2, 3, nearest_neighbour_trainer(), folds2);
  EXPECT_DOUBLE_EQ(moved.logloss, base.logloss);
  EXPECT_DOUBLE_EQ(moved.accuracy, base.accuracy);
}

TEST(CrossValidate, ErrorsNameTheFold) {
  const auto y = balanced_labels(2, 10);
  Matrix X(y.size(), 1, 0.0);
  X(3, 0) = 1.0;
  Trainer picky = [](const Matrix& train, std::span<const int>, int k) -> Predictor {
    for (double v : train.values())
      if (v != 0.0) return [k](const Matrix& Q) { return uniform(Q.rows(), static_cast<std::size_t>(k)); };
    throw DataError("no signal");
  };
  const auto folds = stratified_kfold(y, 2, 5, 0);
  std::size_t owner = 0;
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (std::count(folds[f].begin(), folds[f].end(), 3u)) owner = f;
  try {
    cross_validate(X, y, 2, picky, folds, 2);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(std::string(e.what()), "fold " + std::to_string(owner) + ": no signal");
  }
  Trainer misuse = [](const Matrix&, std::span<const int>, int) -> Predictor { throw UsageError("bad flag"); };
  EXPECT_THROW(cross_validate(X, y, 2, misuse, 5, 0), UsageError);
}
