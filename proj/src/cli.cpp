#include "malclass/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "malclass/bagging.hpp"
#include "malclass/categories.hpp"
#include "malclass/corpus.hpp"
#include "malclass/errors.hpp"
#include "malclass/eval.hpp"
#include "malclass/extract.hpp"
#include "malclass/forest.hpp"
#include "malclass/fusion.hpp"
#include "malclass/lexicon.hpp"

namespace malclass {

namespace {

namespace fs = std::filesystem;

fs::path features_dir(const RunConfig& c) { return c.features_dir.empty() ? c.out_dir / "features" : c.features_dir; }
fs::path model_path(const RunConfig& c) { return c.model.empty() ? c.out_dir / "model.json" : c.model; }
fs::path predictions_path(const RunConfig& c) {
  return c.predictions.empty() ? c.out_dir / "predictions.csv" : c.predictions;
}

void require(const fs::path& path, const std::string& flag) {
  if (path.empty()) throw UsageError(flag + " is required");
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

nlohmann::json params_json(const GbtParams& p) {
  return {{"rounds", p.rounds},       {"learning_rate", p.learning_rate},       {"max_depth", p.max_depth},
          {"lambda", p.lambda},       {"min_child_weight", p.min_child_weight}, {"subsample", p.subsample},
          {"colsample", p.colsample}, {"seed", p.seed}};
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

/// Reads `<features>/<CAT>.csv` for each category, in the given order.
FeatureMatrix load_feature_set(const RunConfig& c, const std::vector<std::string>& categories) {
  std::vector<FeatureMatrix> parts;
  for (const auto& cat : categories) {
    const fs::path path = features_dir(c) / (cat + ".csv");
    if (!fs::exists(path)) throw DataError("missing feature file " + path.string() + " (run extract first)");
    parts.push_back(read_features(path));
  }
  return FeatureMatrix::hconcat(parts);
}

std::vector<std::string> selected_category_names(const RunConfig& c) {
  std::vector<std::string> names;
  for (Category cat : parse_category_list(c.categories)) names.emplace_back(category_name(cat));
  return names;
}

/// Labels for the feature rows, looked up by sample id in the manifest.
std::vector<int> labels_for(const RunConfig& c, const std::vector<std::string>& sample_ids) {
  require(c.manifest, "--manifest");
  const Manifest manifest = load_manifest_labels(c.manifest, c.classes);
  std::map<std::string, int> by_id;
  for (const auto& e : manifest.entries)
    if (e.label) by_id[e.id] = *e.label - 1;
  std::vector<int> labels;
  labels.reserve(sample_ids.size());
  for (const auto& id : sample_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("sample '" + id + "' has no label in " + c.manifest.string());
    labels.push_back(it->second);
  }
  return labels;
}

GbtParams gbt_params(const RunConfig& c) {
  GbtParams p = c.gbt;
  p.seed = c.seed;
  p.validate();
  return p;
}

int cmd_extract(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(c.manifest, "--manifest");
  const fs::path base = c.manifest.parent_path();
  const Manifest manifest = load_manifest(c.manifest, c.bytes_dir.empty() ? base : c.bytes_dir,
                                          c.asm_dir.empty() ? base : c.asm_dir, c.classes);
  const LexiconConfig lexicon = c.lexicon_dir.empty() ? default_lexicon() : load_lexicon(c.lexicon_dir);
  const auto categories = parse_category_list(c.categories);

  const auto start = std::chrono::steady_clock::now();
  const ExtractionResult result = extract_corpus(manifest, lexicon, categories, c.workers);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(features_dir(c));
  for (const auto& m : result.matrices) write_features(m, features_dir(c) / (m.category_ids.front() + ".csv"));
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';

  nlohmann::json timing = nlohmann::json::array();
  for (const auto& t : result.timings)
    timing.push_back({{"name", t.name}, {"total_seconds", t.total_seconds}, {"mean_seconds", t.mean_seconds}});
  write_json(c.out_dir / "extract_timing.json", {{"samples", manifest.entries.size()},
                                                  {"workers", c.workers},
                                                  {"wall_seconds", wall},
                                                  {"warnings", result.warnings.size()},
                                                  {"categories", timing}});

  out << "extracted " << result.matrices.size() << " categories for " << manifest.entries.size() << " samples into "
      << features_dir(c).string() << '\n';
  out << "| Category | Total (s) | Mean per sample (s) |\n|---|---:|---:|\n";
  for (const auto& t : result.timings)
    out << "| " << t.name << " | " << fixed(t.total_seconds, 4) << " | " << fixed(t.mean_seconds, 6) << " |\n";
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const FeatureMatrix features = load_feature_set(c, selected_category_names(c));
  const auto labels = labels_for(c, features.sample_ids);
  TrainOptions options;
  options.workers = c.workers;
  options.feature_names = features.column_names;
  const BaggedGbt model = bagging_train(features.values, labels, c.classes, gbt_params(c), c.bags, c.alpha, options);
  save_model(model, model_path(c));
  const EvalResult fit = evaluate_predictions(model.predict_proba(features.values), labels, c.classes);
  out << "trained " << c.bags << " bag(s) on " << features.values.rows() << " samples x " << features.values.cols()
      << " features; model written to " << model_path(c).string() << '\n'
      << "training accuracy " << fixed(fit.accuracy, 4) << ", training logloss " << fixed(fit.logloss, 4) << '\n';
  return 0;
}

int cmd_predict(const RunConfig& c, std::ostream& out) {
  const BaggedGbt model = load_model(model_path(c));
  std::vector<std::string> categories;
  for (const auto& name : model.feature_names()) {
    const std::string cat = name.substr(0, name.find('_'));
    if (std::find(categories.begin(), categories.end(), cat) == categories.end()) categories.push_back(cat);
  }
  if (categories.empty()) throw DataError("model does not record its feature names");
  const FeatureMatrix features = load_feature_set(c, categories);
  if (features.column_names != model.feature_names()) {
    std::ostringstream msg;
    msg << "feature columns do not match the model: model has " << model.feature_count() << ", files have "
        << features.column_names.size();
    for (std::size_t i = 0; i < std::min(features.column_names.size(), model.feature_names().size()); ++i)
      if (features.column_names[i] != model.feature_names()[i]) {
        msg << "; column " << i << " is '" << features.column_names[i] << "', model expects '"
            << model.feature_names()[i] << "'";
        break;
      }
    throw DataError(msg.str());
  }
  const Matrix p = model.predict_proba(features.values);
  std::string csv = "Id";
  for (int k = 1; k <= model.class_count(); ++k) csv += ",Prediction" + std::to_string(k);
  csv += '\n';
  for (std::size_t r = 0; r < p.rows(); ++r) {
    csv += features.sample_ids[r];
    for (double v : p.row(r)) csv += "," + format_double(v);
    csv += '\n';
  }
  write_text_file(predictions_path(c), csv);
  out << "wrote " << p.rows() << " predictions to " << predictions_path(c).string() << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
  EvalResult result;
  nlohmann::json report;
  if (c.cv) {
    const FeatureMatrix features = load_feature_set(c, selected_category_names(c));
    const auto labels = labels_for(c, features.sample_ids);
    const GbtParams params = gbt_params(c);
    result = cross_validate(features.values, labels, c.classes, make_bagged_trainer(params, c.bags, c.alpha, 1),
                            c.folds, c.seed, c.workers);
    report = eval_to_json(result);
    report["mode"] = "cross_validation";
    report["folds_requested"] = c.folds;
    report["seed"] = c.seed;
    report["bags"] = c.bags;
    report["alpha"] = c.alpha;
    report["params"] = params_json(params);
    report["categories"] = features.category_ids;
  } else {
    const fs::path path = predictions_path(c);
    if (!fs::exists(path)) throw DataError("missing predictions file " + path.string() + " (run predict first)");
    const FeatureMatrix preds = read_features(path);
    const auto labels = labels_for(c, preds.sample_ids);
    result = evaluate_predictions(preds.values, labels, c.classes);
    report = eval_to_json(result);
    report["mode"] = "predictions";
    report["predictions"] = path.string();
  }
  write_json(c.out_dir / "evaluation.json", report);
  if (!c.heatmap.empty()) write_text_file(c.heatmap, confusion_heatmap_pgm(result));
  out << "accuracy " << fixed(result.accuracy, 4) << ", logloss " << fixed(result.logloss, 4) << '\n';
  return 0;
}

int cmd_fuse(const RunConfig& c, std::ostream& out) {
  const auto names = selected_category_names(c);
  std::vector<CategoryBlock> blocks;
  std::vector<FeatureMatrix> matrices;
  for (const auto& name : names) {
    matrices.push_back(load_feature_set(c, {name}));
    blocks.push_back({name, matrices.back().values});
    if (matrices.back().sample_ids != matrices.front().sample_ids)
      throw DataError("feature file for " + name + " lists different samples");
  }
  const auto labels = labels_for(c, matrices.front().sample_ids);

  GbtParams search = gbt_params(c);
  search.rounds = c.fusion_rounds;
  search.max_depth = c.fusion_depth;
  search.validate();
  const Trainer trainer = make_gbt_trainer(search, 1);
  FusionOptions options;
  options.folds = c.folds;
  options.seed = c.seed;
  options.epsilon = c.epsilon;
  options.workers = c.workers;

  nlohmann::json report;
  if (c.singletons) {
    const auto rows = evaluate_category_singletons(blocks, labels, c.classes, trainer, options);
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : rows)
      table.push_back({{"category", r.category},
                       {"feature_count", r.feature_count},
                       {"cv_accuracy", r.cv_accuracy},
                       {"cv_logloss", r.cv_logloss}});
    report["singletons"] = table;
    write_text_file(c.out_dir / "singletons.md", singletons_to_markdown(rows));
    out << singletons_to_markdown(rows) << '\n';
  }
  const FusionReport fusion = forward_stepwise_fusion(blocks, labels, c.classes, trainer, options);
  report["fusion"] = fusion_to_json(fusion);
  report["search_params"] = params_json(search);
  report["epsilon"] = c.epsilon;
  report["folds"] = c.folds;

  // Retrain the selected prefix at full settings.
  std::vector<FeatureMatrix> chosen;
  std::vector<std::string> chosen_names;
  for (std::size_t i = 0; i <= fusion.selected_prefix && i < fusion.steps.size(); ++i) {
    const auto& id = fusion.steps[i].added_category;
    chosen_names.push_back(id);
    chosen.push_back(matrices[static_cast<std::size_t>(std::find(names.begin(), names.end(), id) - names.begin())]);
  }
  const FeatureMatrix selected = FeatureMatrix::hconcat(chosen);
  const GbtParams full = gbt_params(c);
  TrainOptions train_options;
  train_options.workers = c.workers;
  train_options.feature_names = selected.column_names;
  save_model(bagging_train(selected.values, labels, c.classes, full, c.bags, c.alpha, train_options), model_path(c));
  report["selected_categories"] = chosen_names;
  report["final_params"] = params_json(full);
  report["final_bags"] = c.bags;
  report["final_alpha"] = c.alpha;
  report["model"] = model_path(c).string();

  write_json(c.out_dir / "fusion.json", report);
  const std::string table = fusion_to_markdown(fusion);
  write_text_file(c.out_dir / "fusion.md", table);
  std::string selected_list;
  for (const auto& n : chosen_names) selected_list += (selected_list.empty() ? "" : ",") + n;
  write_text_file(c.out_dir / "selected_categories.txt", selected_list + "\n");
  out << table << "\nselected categories: " << selected_list << "\nmodel written to " << model_path(c).string()
      << '\n';
  return 0;
}

int cmd_importance(const RunConfig& c, std::ostream& out) {
  const FeatureMatrix features = load_feature_set(c, selected_category_names(c));
  const auto labels = labels_for(c, features.sample_ids);
  ForestParams params;
  params.n_trees = c.forest_trees;
  params.seed = c.seed;
  const RfModel forest = rf_train(features.values, labels, c.classes, params, c.workers);
  const ImportanceReport report = rf_importance(forest, features.column_names, features.column_categories());

  nlohmann::json cats = nlohmann::json::array();
  std::ostringstream md;
  md << "| Category | Features | Mean importance |\n|---|---:|---:|\n";
  for (const auto& cs : report.categories) {
    cats.push_back({{"category", cs.category}, {"feature_count", cs.feature_count}, {"mean_score", cs.mean_score}});
    md << "| " << cs.category << " | " << cs.feature_count << " | " << format_double(cs.mean_score) << " |\n";
  }
  nlohmann::json feats = nlohmann::json::object();
  for (std::size_t f = 0; f < report.feature_names.size(); ++f) feats[report.feature_names[f]] = report.feature_scores[f];
  write_json(c.out_dir / "importance.json",
             {{"trees", params.n_trees}, {"seed", params.seed}, {"categories", cats}, {"features", feats}});
  write_text_file(c.out_dir / "importance.md", md.str());
  out << md.str();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Malware family classification from hex dumps and disassembly listings", "malclass"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file supplying any flag; explicit flags take precedence");

  app.add_option("--manifest", c.manifest, "Id,Class CSV listing the samples");
  app.add_option("--bytes-dir", c.bytes_dir, "Directory of <Id>.bytes files (default: manifest directory)");
  app.add_option("--asm-dir", c.asm_dir, "Directory of <Id>.asm files (default: manifest directory)");
  app.add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  app.add_option("--features-dir", c.features_dir, "Feature CSV directory (default: <out>/features)");
  app.add_option("--lexicon-dir", c.lexicon_dir, "Directory with opcodes/registers/apis/keywords .txt overrides");
  app.add_option("--model", c.model, "Model file (default: <out>/model.json)");
  app.add_option("--predictions", c.predictions, "Prediction CSV (default: <out>/predictions.csv)");
  app.add_option("--heatmap", c.heatmap, "Write the normalized confusion matrix as a PGM image");
  app.add_option("--categories", c.categories, "Comma-separated category ids or 'all'")->capture_default_str();
  app.add_option("--classes", c.classes, "Number of families")->capture_default_str()->check(CLI::Range(2, 1000));
  app.add_option("--folds", c.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app.add_option("--bags", c.bags, "Bagged boosters")->capture_default_str()->check(CLI::Range(1, 1000));
  app.add_option("--alpha", c.alpha, "Extra resampled rows per bag, as a fraction of the training set")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--epsilon", c.epsilon, "Minimum logloss gain for fusion to add a category")->capture_default_str();
  app.add_option("--workers", c.workers, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
  app.add_option("--rounds", c.gbt.rounds, "Boosting rounds")->capture_default_str();
  app.add_option("--eta", c.gbt.learning_rate, "Learning rate")->capture_default_str();
  app.add_option("--max-depth", c.gbt.max_depth, "Tree depth")->capture_default_str();
  app.add_option("--lambda", c.gbt.lambda, "L2 penalty on leaf weights")->capture_default_str();
  app.add_option("--min-child-weight", c.gbt.min_child_weight, "Minimum hessian per child")->capture_default_str();
  app.add_option("--subsample", c.gbt.subsample, "Row fraction per tree")->capture_default_str();
  app.add_option("--colsample", c.gbt.colsample, "Column fraction per tree")->capture_default_str();
  app.add_option("--fusion-rounds", c.fusion_rounds, "Boosting rounds while searching")->capture_default_str();
  app.add_option("--fusion-depth", c.fusion_depth, "Tree depth while searching")->capture_default_str();
  app.add_flag("--singletons", c.singletons, "Also score each category on its own");
  app.add_flag("--cv", c.cv, "Cross-validate instead of scoring a prediction file");
  app.add_option("--forest-trees", c.forest_trees, "Random forest size")->capture_default_str();

  using Command = std::function<int()>;
  std::vector<std::pair<CLI::App*, Command>> commands;
  auto add = [&](const char* name, const char* help, Command fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    commands.emplace_back(sub, std::move(fn));
  };
  add("extract", "Parse samples and write one feature CSV per category", [&] { return cmd_extract(c, out, err); });
  add("train", "Train a bagged boosted-tree model", [&] { return cmd_train(c, out); });
  add("predict", "Write class probabilities for every sample", [&] { return cmd_predict(c, out); });
  add("evaluate", "Score a prediction file, or cross-validate with --cv", [&] { return cmd_evaluate(c, out); });
  add("fuse", "Forward stepwise selection of feature categories", [&] { return cmd_fuse(c, out); });
  add("importance", "Random forest impurity importance per category", [&] { return cmd_importance(c, out); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    fs::create_directories(c.out_dir);
    for (auto& [sub, fn] : commands)
      if (sub->parsed()) return fn();
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace malclass
