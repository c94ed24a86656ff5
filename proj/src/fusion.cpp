#include "malclass/fusion.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "malclass/errors.hpp"
#include "malclass/parallel.hpp"

namespace malclass {

namespace {

void check_blocks(std::span<const CategoryBlock> categories, std::span<const int> labels) {
  if (categories.empty()) throw DataError("no feature categories given");
  std::set<std::string> ids;
  for (const auto& c : categories) {
    if (!ids.insert(c.id).second) throw DataError("category " + c.id + " appears twice");
    if (c.values.rows() != labels.size())
      throw DataError("category " + c.id + " has " + std::to_string(c.values.rows()) + " rows, expected " +
                      std::to_string(labels.size()));
    if (c.values.cols() == 0) throw DataError("category " + c.id + " has no columns");
  }
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const UsageError& e) {
    throw UsageError(context + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(context + e.what());
  } catch (const std::exception& e) {
    throw DataError(context + e.what());
  }
}

struct Scored {
  std::size_t index = 0;
  std::size_t dimension = 0;
  double accuracy = 0.0;
  double logloss = 0.0;
};

// Lower logloss first, then the smaller block, then the lexicographic id.
bool better(const Scored& a, const Scored& b, std::span<const CategoryBlock> categories) {
  if (a.logloss != b.logloss) return a.logloss < b.logloss;
  if (a.dimension != b.dimension) return a.dimension < b.dimension;
  return categories[a.index].id < categories[b.index].id;
}

}  // namespace

FusionReport forward_stepwise_fusion(std::span<const CategoryBlock> categories, std::span<const int> labels,
                                     int class_count, const Trainer& trainer, const FusionOptions& options) {
  check_blocks(categories, labels);
  if (categories.size() < 2) throw DataError("fusion needs at least two categories");
  const auto folds = stratified_kfold(labels, class_count, options.folds, options.seed);

  FusionReport report;
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> remaining(categories.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;
  std::size_t width = 0;

  while (!remaining.empty()) {
    const std::size_t step = report.steps.size() + 1;
    std::vector<Scored> scores(remaining.size());
    parallel_for(remaining.size(), options.workers, [&](std::size_t i) {
      const std::size_t cand = remaining[i];
      try {
        std::vector<const Matrix*> parts;
        for (std::size_t c : chosen) parts.push_back(&categories[c].values);
        parts.push_back(&categories[cand].values);
        const Matrix X = Matrix::hconcat(parts);
        const EvalResult r = cross_validate(X, labels, class_count, trainer, folds, 1);
        scores[i] = {cand, categories[cand].values.cols(), r.accuracy, r.logloss};
      } catch (...) {
        rethrow_with_context("fusion step " + std::to_string(step) + ", candidate " + categories[cand].id + ": ");
      }
    });
    report.candidate_evaluations += remaining.size();

    Scored best = scores.front();
    for (const auto& s : scores)
      if (better(s, best, categories)) best = s;
    // The first step is always taken; later ones must pay for themselves.
    if (!report.steps.empty() && report.steps.back().cv_logloss - best.logloss < options.epsilon) {
      report.stopped_early = true;
      break;
    }
    width += best.dimension;
    report.steps.push_back({categories[best.index].id, width, best.accuracy, best.logloss});
    chosen.push_back(best.index);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best.index));
  }

  for (std::size_t i = 1; i < report.steps.size(); ++i)
    if (report.steps[i].cv_logloss < report.steps[report.selected_prefix].cv_logloss) report.selected_prefix = i;
  return report;
}

std::vector<SingletonResult> evaluate_category_singletons(std::span<const CategoryBlock> categories,
                                                          std::span<const int> labels, int class_count,
                                                          const Trainer& trainer, const FusionOptions& options) {
  check_blocks(categories, labels);
  const auto folds = stratified_kfold(labels, class_count, options.folds, options.seed);
  std::vector<SingletonResult> rows(categories.size());
  parallel_for(categories.size(), options.workers, [&](std::size_t i) {
    try {
      const EvalResult r = cross_validate(categories[i].values, labels, class_count, trainer, folds, 1);
      rows[i] = {categories[i].id, categories[i].values.cols(), r.accuracy, r.logloss};
    } catch (...) {
      rethrow_with_context("category " + categories[i].id + ": ");
    }
  });
  std::stable_sort(rows.begin(), rows.end(), [](const SingletonResult& a, const SingletonResult& b) {
    if (a.cv_logloss != b.cv_logloss) return a.cv_logloss < b.cv_logloss;
    return a.category < b.category;
  });
  return rows;
}

nlohmann::json fusion_to_json(const FusionReport& report) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : report.steps)
    steps.push_back({{"added_category", s.added_category},
                     {"cumulative_feature_count", s.cumulative_feature_count},
                     {"cv_accuracy", s.cv_accuracy},
                     {"cv_logloss", s.cv_logloss}});
  return {{"steps", steps},
          {"selected_prefix", report.selected_prefix},
          {"stopped_early", report.stopped_early},
          {"candidate_evaluations", report.candidate_evaluations}};
}

std::string fusion_to_markdown(const FusionReport& report) {
  std::ostringstream out;
  out << "| Combination | Features | CV accuracy | CV logloss |\n|---|---:|---:|---:|\n";
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const auto& s = report.steps[i];
    out << "| C" << i + 1 << ": ";
    if (i > 0) out << 'C' << i << '+';
    out << s.added_category << (i == report.selected_prefix ? " (selected)" : "") << " | "
        << s.cumulative_feature_count << " | " << fixed4(s.cv_accuracy) << " | " << fixed4(s.cv_logloss) << " |\n";
  }
  return out.str();
}

std::string singletons_to_markdown(std::span<const SingletonResult> rows) {
  std::ostringstream out;
  out << "| Category | Features | CV accuracy | CV logloss |\n|---|---:|---:|---:|\n";
  for (const auto& r : rows)
    out << "| " << r.category << " | " << r.feature_count << " | " << fixed4(r.cv_accuracy) << " | "
        << fixed4(r.cv_logloss) << " |\n";
  return out.str();
}

}  // namespace malclass
