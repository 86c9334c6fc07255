#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "charterseg/tree.hpp"

namespace charterseg {

struct ForestParams {
  std::size_t n_trees = 2000;
  std::optional<std::size_t> mtry;  ///< default max(m / 3, 1)
  std::size_t min_leaf = 5;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  /// Test hook: train every tree on each row exactly once.
  bool identity_bootstrap = false;

  std::size_t resolved_mtry(std::size_t num_features) const;
};

/// Bagged regression trees. Each tree keeps its bootstrap multiset as
/// per-row draw counts; a row is out of bag for a tree when its count is 0.
struct Forest {
  std::vector<RegressionTree> trees;
  std::vector<std::vector<std::uint32_t>> in_bag_counts;  ///< [tree][row]
  ForestParams params;
  std::vector<std::string> feature_names;

  std::size_t num_rows() const { return in_bag_counts.empty() ? 0 : in_bag_counts.front().size(); }
  std::vector<std::size_t> out_of_bag_rows(std::size_t tree) const;
  double oob_fraction(std::size_t tree) const;
};

/// Seed of tree `index` under the forest's master seed.
std::uint64_t tree_seed(std::uint64_t master, std::size_t index);

/// Two-stage randomization: a seeded bootstrap of n rows per tree, and a
/// fresh random subset of mtry candidate features at every node. Trees are
/// grown to min_leaf without pruning. Results do not depend on `jobs`.
/// Throws ConfigError when mtry > m.
Forest grow_forest(const TrainingView& data, const std::vector<std::string>& feature_names,
                   const ForestParams& params);
Forest grow_forest(const ScoredMatrix& matrix, const ForestParams& params);

struct OobPrediction {
  std::vector<double> prediction;  ///< NaN for rows in every bootstrap
  std::vector<bool> has_prediction;
  std::vector<std::size_t> tree_count;  ///< trees voting on each row
  double oob_mse = 0;
  std::size_t rows_used = 0;
};

OobPrediction oob_predict(const Forest& forest, const TrainingView& data);

struct FeatureImportance {
  std::string feature;
  double pct_inc_mse = 0;  ///< 100 * raw_delta / forest OOB MSE
  double raw_delta = 0;    ///< mean over trees of (permuted OOB MSE - OOB MSE)
  double std_error = 0;    ///< standard error of raw_delta across trees
};

struct ImportanceReport {
  std::vector<FeatureImportance> features;
  double oob_mse = 0;

  /// Entry for `name`; throws ConfigError when absent.
  const FeatureImportance& at(std::string_view name) const;
  /// Feature names ordered by decreasing %IncMSE (stable).
  std::vector<std::string> ranking() const;
};

/// Permutation importance on out-of-bag rows, per tree and per feature.
ImportanceReport permutation_importance(const Forest& forest, const TrainingView& data,
                                        std::uint64_t seed, std::size_t jobs = 1);

/// Columns: feature, pct_inc_mse, raw_delta, std_error.
std::string importance_csv(const ImportanceReport& report);
/// Reads the CSV written by importance_csv (extra columns ignored).
ImportanceReport parse_importance_csv(std::string_view text);

}  // namespace charterseg
