#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "charterseg/analysis.hpp"
#include "charterseg/dataset.hpp"
#include "charterseg/forest.hpp"
#include "charterseg/rescale.hpp"
#include "charterseg/tree.hpp"

namespace charterseg {

enum class RescaleScope { Full, Subsample };
enum class SelectionMode { RandomForest, Fixed };
/// One forest over every candidate proxy, or one forest per CAMELS group.
enum class SelectionForest { Joint, PerGroup };

std::string_view rescale_scope_name(RescaleScope scope);
RescaleScope parse_rescale_scope(std::string_view text);

struct SubsampleDef {
  std::string name;
  SubsampleCriterion criterion;
  std::optional<std::size_t> min_leaf;  ///< overrides the tree default
};

/// Everything a run needs. Loaded from one JSON file; CLI flags override.
///
/// {
///   "data": {"path": "panel.csv", "columns": {"total_assets": "TA"},
///            "optional_columns": ["beta"], "returns_path": "returns.csv"},
///   "window": [2005, 2016],
///   "proxies": [{"name": "Capt", "group": "C", "raw_field": "capital_ratio",
///                "direction": "decreasing", "mode": "quantile"}, ...],
///   "selection": {"mode": "rf" | "fixed", "forest": "joint" | "per-group",
///                 "fixed": ["Capt", ...]},
///   "rescale_scope": "subsample" | "full",
///   "subsamples": [{"name": "2008-2009", "years": [2008, 2009]},
///                  {"name": "pigs", "countries": "PIGS"},
///                  {"name": "small", "size": "small", "min_leaf": 10}],
///   "tree": {"min_leaf": 30, "max_depth": null, "folds": 10, "prune_rule": "min-cv",
///            "relax_min_leaf": false, "relaxed_min_leaf": 5},
///   "forest": {"n_trees": 2000, "mtry": null, "min_leaf": 5},
///   "verdict_scope": "paths" | "all",
///   "output": "out", "seed": 1, "jobs": 1
/// }
struct RunConfig {
  std::filesystem::path data_path;
  ColumnSchema schema;
  std::optional<std::filesystem::path> returns_path;

  std::vector<ProxySpec> proxies = default_proxy_specs();
  SelectionMode selection = SelectionMode::Fixed;
  SelectionForest selection_forest = SelectionForest::Joint;
  std::vector<std::string> fixed_selection{"Capt", "Asts", "Mang", "Ergs_x", "Liqt_x", "Syst"};
  RescaleScope rescale_scope = RescaleScope::Subsample;
  std::vector<SubsampleDef> subsamples = default_subsamples();

  TreeParams tree;
  std::size_t folds = 10;
  PruneRule prune_rule = PruneRule::MinCv;
  bool relax_min_leaf = false;
  std::size_t relaxed_min_leaf = 5;

  ForestParams forest;
  VerdictScope verdict_scope = VerdictScope::Paths;

  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  /// Whole window, the four crisis phases, non-PIGS/PIGS, small/large.
  static std::vector<SubsampleDef> default_subsamples();

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Parses a JSON configuration. Relative paths resolve against `base_dir`.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Environment variable naming the default configuration file.
inline constexpr const char* kConfigEnvVar = "CHARTERSEG_CONFIG";

}  // namespace charterseg
