#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "malclass/gbt.hpp"

namespace malclass {

/// Every setting a command can read. Flags map one-to-one onto these fields;
/// a `--config` file of `key=value` lines may supply any of them and
/// explicit flags win.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path bytes_dir;
  std::filesystem::path asm_dir;
  std::filesystem::path out_dir = "out";
  std::filesystem::path features_dir;  ///< empty = <out>/features
  std::filesystem::path lexicon_dir;   ///< empty = built-in lists
  std::filesystem::path model;         ///< empty = <out>/model.json
  std::filesystem::path predictions;   ///< empty = <out>/predictions.csv
  std::filesystem::path heatmap;
  std::string categories = "all";
  int classes = 9;
  int folds = 5;
  std::uint64_t seed = 0;
  int bags = 8;
  double alpha = 1.0;
  double epsilon = 1e-4;
  int workers = 1;
  GbtParams gbt;
  int fusion_rounds = 50;
  int fusion_depth = 4;
  bool singletons = false;
  bool cv = false;
  int forest_trees = 100;
};

/// Entry point behind the `malclass` binary; `args` excludes the program
/// name. Returns 0 on success, 1 for usage errors, 2 for data or format
/// errors and 3 for internal invariant violations.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace malclass
