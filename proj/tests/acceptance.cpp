// Acceptance gate: one PASS/FAIL line per criterion, with its runtime against
// the time budget. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "malclass/asmparse.hpp"
#include "malclass/bagging.hpp"
#include "malclass/categories.hpp"
#include "malclass/cli.hpp"
#include "malclass/corpus.hpp"
#include "malclass/eval.hpp"
#include "malclass/extract.hpp"
#include "malclass/forest.hpp"
#include "malclass/fusion.hpp"
#include "malclass/gbt.hpp"
#include "malclass/hexfeat.hpp"
#include "malclass/hexparse.hpp"
#include "malclass/lexicon.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace malclass;
using malclass::testing::TempDir;
namespace fs = std::filesystem;

namespace {

/// Collects failed checks for one criterion.
class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }

  bool passed() const { return failed_ == 0; }
  std::string summary() const {
    std::string s = notes_;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + std::string("FAILED ") + f;
    if (failed_ > failures_.size()) s += "; " + std::to_string(failed_ - failures_.size()) + " more failures";
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
  std::string notes_;
};

std::string num(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

struct Outcome {
  int passed = 0;
  int failed = 0;
  int skipped = 0;
};

void run_criterion(Outcome& outcome, int id, const std::string& title, double budget_seconds,
                   const std::function<void(Check&)>& body) {
  Check check;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(check);
  } catch (const std::exception& e) {
    check.require(false, std::string("exception: ") + e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_budget = seconds <= budget_seconds;
  const bool ok = check.passed() && in_budget;
  (ok ? outcome.passed : outcome.failed)++;
  std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << title << "  (" << std::fixed << std::setprecision(2)
            << seconds << " s, budget " << budget_seconds << " s" << (in_budget ? "" : ", OVER BUDGET") << ")"
            << std::defaultfloat;
  const auto summary = check.summary();
  if (!summary.empty()) std::cout << "  " << summary;
  std::cout << std::endl;
}

HexDump dump_of(std::vector<std::uint16_t> bytes) {
  HexDump d;
  d.bytes = std::move(bytes);
  d.line_count = (d.bytes.size() + 15) / 16;
  return d;
}

Matrix uniform_rows(std::size_t n, std::size_t k) { return Matrix(n, k, 1.0 / static_cast<double>(k)); }

double softmax_loss(const std::vector<double>& m, int y) {
  const double top = *std::max_element(m.begin(), m.end());
  double z = 0.0;
  for (double v : m) z += std::exp(v - top);
  return -(m[static_cast<std::size_t>(y)] - top - std::log(z));
}

void criterion_metrics(Check& c) {
  std::vector<int> y;
  for (int i = 0; i < 90; ++i) y.push_back(i % 9);
  const double uniform = logloss(uniform_rows(y.size(), 9), y);
  c.require(std::abs(uniform - 2.1972246) <= 1e-7 && std::abs(uniform - std::log(9.0)) <= 1e-9,
            "uniform logloss " + num(uniform, 12));
  Matrix onehot(y.size(), 9);
  for (std::size_t i = 0; i < y.size(); ++i) onehot(i, static_cast<std::size_t>(y[i])) = 1.0;
  const double perfect = logloss(onehot, y);
  c.require(perfect <= 1e-14, "one-hot logloss " + num(perfect));
  Matrix two(2, 2);
  two(0, 0) = 0.8;
  two(0, 1) = 0.2;
  two(1, 0) = 0.6;
  two(1, 1) = 0.4;
  const double hand = logloss(two, std::vector<int>{0, 1});
  c.require(std::abs(hand - 0.569717) <= 1e-6, "two-row example " + num(hand, 10));
  c.note("ln9 " + num(uniform, 10) + ", one-hot " + num(perfect) + ", two-row " + num(hand, 8));
}

void criterion_entropy(Check& c) {
  std::mt19937_64 rng(2024);
  std::size_t windows = 0;
  double worst = 0.0;
  while (windows < 1000) {
    // Ten full windows per dump, each with its own alphabet size.
    std::vector<std::uint16_t> bytes;
    for (int w = 0; w < 10; ++w) {
      const unsigned alphabet = 1 + static_cast<unsigned>(rng() % 256);
      for (std::size_t i = 0; i < kEntropyWindow; ++i) bytes.push_back(static_cast<std::uint16_t>(rng() % alphabet));
    }
    const auto series = entropy_series(dump_of(bytes));
    c.require(series.window_entropies.size() == 10, "window count");
    for (std::size_t w = 0; w < series.window_entropies.size(); ++w, ++windows) {
      std::vector<std::uint8_t> slice(bytes.begin() + static_cast<long>(w * kEntropyWindow),
                                      bytes.begin() + static_cast<long>((w + 1) * kEntropyWindow));
      worst = std::max(worst, std::abs(series.window_entropies[w] - oracle::entropy_recount(slice)));
    }
  }
  c.require(worst <= 1e-12, "max deviation " + num(worst));

  const auto zero = entropy_series(dump_of(std::vector<std::uint16_t>(kEntropyWindow, 0x41)));
  c.require(zero.window_entropies == std::vector<double>{0.0}, "constant window is not exactly 0");
  std::vector<std::uint16_t> all_values;
  for (int rep = 0; rep < 39; ++rep)
    for (int b = 0; b < 256; ++b) all_values.push_back(static_cast<std::uint16_t>(b));
  const auto eight = entropy_series(dump_of(all_values), all_values.size());
  c.require(eight.window_entropies == std::vector<double>{8.0}, "uniform window is not exactly 8");
  c.note(std::to_string(windows) + " windows, max |diff| " + num(worst));
}

GrayImage random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  GrayImage img;
  img.height = h;
  img.width = w;
  for (std::size_t i = 0; i < h * w; ++i) img.pixels.push_back(static_cast<std::uint8_t>(rng() & 0xFF));
  return img;
}

void criterion_texture(Check& c) {
  std::mt19937_64 rng(33);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto img = random_image(8, 8, rng);
    const auto v = extract_img1(img);
    for (std::size_t d = 0; d < 4; ++d) {
      const auto ref = oracle::haralick(oracle::glcm_enumerate(img, kGlcmOffsets[d].dr, kGlcmOffsets[d].dc));
      for (std::size_t k = 0; k < kHaralickFeatureCount; ++k)
        worst = std::max(worst, std::abs(v[d * kHaralickFeatureCount + k] - ref[k]));
    }
  }
  c.require(worst <= 1e-9, "max deviation " + num(worst));

  GrayImage flat;
  flat.height = 8;
  flat.width = 8;
  flat.pixels.assign(64, 0x80);
  const auto v = extract_img1(flat);
  for (std::size_t d = 0; d < 4; ++d) {
    const std::size_t o = d * kHaralickFeatureCount;
    c.require(v[o + 0] == 1.0, "constant ASM");
    c.require(v[o + 1] == 0.0, "constant contrast");
    c.require(v[o + 2] == 0.0 && v[o + 11] == 0.0 && v[o + 12] == 0.0, "degenerate statistics");
  }
  c.note("20 images x 4 directions x 13 stats, max |diff| " + num(worst));
}

void criterion_parsers(Check& c) {
  const auto hex = parse_hexdump("004010D0 8D 15 A8 80 63 00 BF 55 70 00 00 52 FF 72 7C 53");
  c.require(hex.first_address == 0x4010D0 && hex.bytes.size() == 16 && hex.bytes[0] == 0x8D && hex.bytes[1] == 0x15,
            "hex line");
  const auto lea = parse_asm_line(".text:00635CD0 8D 15 A8 80 63 00    lea     edx, unk_6380A8");
  c.require(lea && lea->section == ".text" && lea->mnemonic == "lea" &&
                lea->operands == std::vector<std::string>{"edx", "unk_6380A8"},
            "lea line");
  const auto db = parse_asm_line("DATA:0042F259 E1    db 0E1h ; \xC3\xA1");
  c.require(db && db->section == "DATA" && db->mnemonic == "db" && db->operands == std::vector<std::string>{"0E1h"},
            "db line");
  const auto dd = parse_asm_line(
      ".aspack:004BFA2C 20 20 20 00 34 34 34 00 56 56 56 00 0B 0B 0B 7B+ dd 202020h, 343434h, 565656h, "
      "7B0B0B0Bh, 0FF292929h, 0FC282828h");
  c.require(dd && dd->mnemonic == "dd" && dd->operands.size() == 6, "dd line");
}

void criterion_gradient(Check& c) {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> n(0.0, 2.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int point = 0; point < 100; ++point) {
    std::vector<double> m(9);
    for (double& v : m) v = n(rng);
    const int y = static_cast<int>(rng() % 9);
    std::vector<double> p = m;
    softmax_inplace(p);
    const auto [g, hess] = gbt_grad_hess(p, y);
    for (std::size_t k = 0; k < 9; ++k) {
      auto up = m, down = m;
      up[k] += h;
      down[k] -= h;
      const double fd = (softmax_loss(up, y) - softmax_loss(down, y)) / (2 * h);
      const double rel = std::abs(g[k] - fd) / std::max(std::abs(fd), 1e-8);
      // Gradients near zero are compared absolutely.
      worst = std::max(worst, std::abs(fd) < 1e-3 ? std::abs(g[k] - fd) : rel);
      // Diagonal hessian against the derivative of the analytic gradient.
      std::vector<double> pu = up, pd = down;
      softmax_inplace(pu);
      softmax_inplace(pd);
      const double fd_h = (pu[k] - pd[k]) / (2 * h);
      worst = std::max(worst, std::abs(fd_h) < 1e-3 ? std::abs(hess[k] - fd_h)
                                                    : std::abs(hess[k] - fd_h) / std::abs(fd_h));
    }
  }
  c.require(worst < 1e-4, "max relative error " + num(worst));
  c.note("100 points x 9 classes, max rel-err " + num(worst));
}

struct SyntheticRun {
  std::vector<FeatureMatrix> matrices;
  std::vector<int> labels;
  double extract_seconds = 0.0;
};

SyntheticRun extract_synthetic(const fs::path& dir, int families, int per_family, std::uint64_t seed, int workers) {
  const auto manifest = generate_synthetic_corpus(dir, families, per_family, seed);
  const auto start = std::chrono::steady_clock::now();
  auto result = extract_corpus(manifest, default_lexicon(), kAllCategories, workers);
  SyntheticRun run;
  run.extract_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.matrices = std::move(result.matrices);
  run.labels = manifest.zero_based_labels();
  return run;
}

void criterion_end_to_end(Check& c, const SyntheticRun& run) {
  const auto all = FeatureMatrix::hconcat(run.matrices);
  const auto res = cross_validate(all.values, run.labels, 9, make_gbt_trainer(GbtParams{}), 5, 0);
  c.require(res.accuracy >= 0.95, "accuracy " + num(res.accuracy));
  c.require(res.logloss <= 0.25, "logloss " + num(res.logloss));
  c.note(std::to_string(all.values.rows()) + "x" + std::to_string(all.values.cols()) + ", extract " +
         num(run.extract_seconds, 3) + " s, CV accuracy " + num(res.accuracy, 4) + ", logloss " +
         num(res.logloss, 4) + " (uniform 2.1972)");

  // The two-family corpus through the same pipeline.
  TempDir dir("acceptance_two");
  const auto two = extract_synthetic(dir.path(), 2, 50, 1, 1);
  const auto both = FeatureMatrix::hconcat(two.matrices);
  const auto res2 = cross_validate(both.values, two.labels, 2, make_gbt_trainer(GbtParams{}), 5, 0);
  c.require(res2.accuracy >= 0.95, "2x50 accuracy " + num(res2.accuracy));
  c.note("2x50 CV accuracy " + num(res2.accuracy, 4));
}

void criterion_resubstitution(Check& c, const SyntheticRun& run) {
  std::string worst_gap;
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& m : run.matrices) {
    const auto cv = cross_validate(m.values, run.labels, 9, make_gbt_trainer(GbtParams{}), 5, 0);
    const auto model = gbt_train(m.values, run.labels, 9, GbtParams{});
    const double train = accuracy(model.predict_proba(m.values), run.labels);
    c.require(train >= cv.accuracy, m.category_ids.front() + " train " + num(train) + " < CV " + num(cv.accuracy));
    if (train - cv.accuracy < min_gap) {
      min_gap = train - cv.accuracy;
      worst_gap = m.category_ids.front();
    }
  }
  c.note("14 categories, smallest train-CV gap " + num(min_gap, 4) + " (" + worst_gap + ")");
}

struct FusionProblem {
  std::vector<int> labels;
  std::vector<CategoryBlock> blocks;
};

FusionProblem fusion_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  FusionProblem p;
  for (int i = 0; i < 90; ++i) p.labels.push_back(i % 3);
  const std::size_t n = p.labels.size();
  for (int b = 0; b < 3; ++b) {
    CategoryBlock noise{"NOISE" + std::to_string(b + 1), Matrix(n, 6)};
    for (double& v : noise.values.values()) v = n01(rng);
    p.blocks.push_back(noise);
  }
  CategoryBlock signal{"SIGNAL", Matrix(n, 3)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < 3; ++j)
      signal.values(r, j) = 0.5 * n01(rng) + (static_cast<int>(j) == p.labels[r] ? 3.0 : 0.0);
  p.blocks.insert(p.blocks.begin() + 2, signal);
  return p;
}

/// The cheap search configuration used by the fuse command.
GbtParams search_params() {
  GbtParams p;
  p.rounds = 50;
  p.max_depth = 4;
  return p;
}

void criterion_fusion(Check& c) {
  const auto p = fusion_problem(77);
  std::atomic<std::size_t> calls{0};
  const Trainer inner = make_gbt_trainer(search_params());
  const Trainer counting = [&](const Matrix& X, std::span<const int> y, int k) {
    ++calls;
    return inner(X, y, k);
  };
  FusionOptions options;
  options.epsilon = 1e-4;
  const auto report = forward_stepwise_fusion(p.blocks, p.labels, 3, counting, options);
  const std::size_t C = p.blocks.size();
  c.require(!report.steps.empty() && report.steps[0].added_category == "SIGNAL", "predictive category not first");
  c.require(report.stopped_early && report.steps.size() < C, "did not stop before adding every noise category");
  for (std::size_t s = 1; s < report.steps.size(); ++s)
    c.require(report.steps[s].cv_logloss <= report.steps[s - 1].cv_logloss, "logloss increased along the path");
  c.require(report.candidate_evaluations <= C * (C + 1) / 2, "too many candidate evaluations");
  c.require(calls == report.candidate_evaluations * static_cast<std::size_t>(options.folds),
            "trainer calls do not match candidate evaluations x folds");
  std::string path;
  for (const auto& s : report.steps) path += (path.empty() ? "" : " -> ") + s.added_category + "@" + num(s.cv_logloss, 4);
  c.note(path + ", " + std::to_string(report.candidate_evaluations) + " candidate evaluations (bound " +
         std::to_string(C * (C + 1) / 2) + ")");
}

void criterion_importance(Check& c) {
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 300, f = 30, planted = 13;
  Matrix X(n, f);
  std::vector<int> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    y[r] = static_cast<int>(rng() % 3);
    for (std::size_t j = 0; j < f; ++j) X(r, j) = u(rng);
    X(r, planted) = static_cast<double>(y[r]);
  }
  ForestParams params;
  params.n_trees = 100;
  params.seed = 3;
  const auto model = rf_train(X, y, 3, params);
  std::vector<std::string> names, cats;
  for (std::size_t j = 0; j < f; ++j) {
    names.push_back("F" + std::to_string(j));
    cats.push_back(j == planted ? "PLANTED" : "NOISE" + std::to_string(j % 3));
  }
  const auto report = rf_importance(model, names, cats);
  const double total = std::accumulate(report.feature_scores.begin(), report.feature_scores.end(), 0.0);
  c.require(std::abs(total - 1.0) <= 1e-9, "importance sums to " + num(total, 15));
  double best_noise = 0.0;
  for (std::size_t j = 0; j < f; ++j)
    if (j != planted) best_noise = std::max(best_noise, report.feature_scores[j]);
  c.require(report.feature_scores[planted] > best_noise, "planted feature not ranked first");
  c.require(report.categories.front().category == "PLANTED", "planted category not ranked first");
  c.note("planted " + num(report.feature_scores[planted], 4) + " vs best noise " + num(best_noise, 4));
}

void criterion_determinism(Check& c, const SyntheticRun& serial) {
  TempDir dir("acceptance_workers");
  const auto parallel = extract_synthetic(dir.path(), 9, 10, 7, 4);
  c.require(parallel.matrices == serial.matrices, "feature matrices differ between 1 and 4 workers");

  const auto all = FeatureMatrix::hconcat(serial.matrices);
  GbtParams params;
  params.rounds = 30;
  params.subsample = 0.8;
  params.colsample = 0.5;
  params.seed = 5;
  TrainOptions one, four;
  one.feature_names = four.feature_names = all.column_names;
  four.workers = 4;
  const auto a = bagging_train(all.values, serial.labels, 9, params, 3, 1.0, one);
  const auto b = bagging_train(all.values, serial.labels, 9, params, 3, 1.0, four);
  c.require(a == b, "models differ between 1 and 4 workers");
  const auto cv1 = cross_validate(all.values, serial.labels, 9, make_gbt_trainer(params, 1), 5, 0, 1);
  const auto cv4 = cross_validate(all.values, serial.labels, 9, make_gbt_trainer(params, 4), 5, 0, 4);
  c.require(cv1.probabilities == cv4.probabilities, "CV predictions differ between 1 and 4 workers");

  save_model(a, dir.path() / "model.json");
  const auto back = load_model(dir.path() / "model.json");
  c.require(back == a, "model round-trip is not exact");
  c.require(back.predict_proba(all.values) == a.predict_proba(all.values), "reloaded model predicts differently");

  for (const auto& m : serial.matrices) {
    const auto path = dir.path() / (m.category_ids.front() + ".csv");
    write_features(m, path);
    c.require(read_features(path) == m, m.category_ids.front() + " CSV round-trip is not exact");
  }
  c.note("extraction, bagged training and CV identical at 1 and 4 workers; 14 CSVs and model round-trip exactly");
}

void criterion_real_corpus(Check& c, const std::string& root) {
  const fs::path base(root);
  TempDir out("acceptance_real");
  const std::string o = out.path().string();
  const std::string manifest = (base / "trainLabels.csv").string();
  std::ostringstream sink, err;
  auto step = [&](std::vector<std::string> args) {
    const int code = run_cli(args, sink, err);
    c.require(code == 0, args.front() + " exited with " + std::to_string(code) + ": " + err.str());
    return code == 0;
  };
  const std::string workers = std::to_string(std::max(1u, std::thread::hardware_concurrency()));
  if (!step({"extract", "--manifest", manifest, "--out", o, "--workers", workers})) return;
  if (!step({"fuse", "--manifest", manifest, "--out", o, "--workers", workers})) return;
  if (!step({"predict", "--out", o})) return;
  const auto preds = read_features(out.path() / "predictions.csv");
  c.require(preds.column_names.size() == 9, "submission does not have 9 probability columns");
  c.note(std::to_string(preds.values.rows()) + " rows predicted");
}

}  // namespace

int main() {
  Outcome outcome;
  std::cout << "malclass acceptance gate" << std::endl;

  run_criterion(outcome, 1, "metric exactness", 1.0, criterion_metrics);
  run_criterion(outcome, 2, "entropy oracle", 5.0, criterion_entropy);
  run_criterion(outcome, 3, "texture oracle", 5.0, criterion_texture);
  run_criterion(outcome, 4, "parser fidelity", 1.0, criterion_parsers);
  run_criterion(outcome, 5, "gradient check", 5.0, criterion_gradient);

  TempDir corpus("acceptance_corpus");
  SyntheticRun synthetic;
  const auto e2e_start = std::chrono::steady_clock::now();
  run_criterion(outcome, 6, "end-to-end synthetic reproduction", 120.0, [&](Check& c) {
    synthetic = extract_synthetic(corpus.path(), 9, 10, 7, 1);
    criterion_end_to_end(c, synthetic);
  });
  run_criterion(outcome, 9, "resubstitution ordering", 120.0, [&](Check& c) {
    criterion_resubstitution(c, synthetic);
    const double shared = std::chrono::duration<double>(std::chrono::steady_clock::now() - e2e_start).count();
    c.require(shared <= 120.0, "criteria 6 and 9 together took " + num(shared, 4) + " s");
    c.note("criteria 6 + 9 together " + num(shared, 3) + " s");
  });
  run_criterion(outcome, 7, "fusion behaviour", 180.0, criterion_fusion);
  run_criterion(outcome, 8, "importance sanity", 30.0, criterion_importance);
  run_criterion(outcome, 10, "determinism and round-trips", 60.0,
                [&](Check& c) { criterion_determinism(c, synthetic); });

  if (const char* root = std::getenv("MALCLASS_REAL_CORPUS"); root && *root) {
    run_criterion(outcome, 11, "real corpus pipeline", std::numeric_limits<double>::infinity(),
                  [&](Check& c) { criterion_real_corpus(c, root); });
  } else {
    ++outcome.skipped;
    std::cout << "SKIP  [11] real corpus pipeline  (set MALCLASS_REAL_CORPUS to a directory holding trainLabels.csv "
                 "and the .bytes/.asm files)"
              << std::endl;
  }

  std::cout << outcome.passed << " passed, " << outcome.failed << " failed, " << outcome.skipped << " skipped"
            << std::endl;
  return outcome.failed == 0 ? 0 : 1;
}
