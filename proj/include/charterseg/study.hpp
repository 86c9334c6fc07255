#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "charterseg/analysis.hpp"
#include "charterseg/config.hpp"
#include "charterseg/select.hpp"

namespace charterseg {

struct StatRow {
  std::string variable;
  std::optional<SummaryStats> stats;  ///< absent when no finite value
};

/// Outcome for one configured subsample.
struct SubsampleResult {
  std::string name;
  std::size_t panel_rows = 0;   ///< bank-years in the subsample
  std::size_t usable_rows = 0;  ///< rows with Q and every active proxy defined
  std::size_t min_leaf = 0;     ///< stopping rule actually used
  bool relaxed = false;
  std::optional<std::string> no_tree;  ///< reason when no tree was grown
  std::vector<StatRow> summary;        ///< Q and raw proxies of the subsample

  RegressionTree tree;
  PruneTrace trace;
  ExtremeLeaves extremes;
  AlignmentVerdicts verdicts;
  std::vector<std::pair<std::string, std::optional<Correlation>>> correlations;
  std::optional<GroupComparison> comparison;
  std::vector<Exclusion> exclusions;

  bool has_tree() const { return !no_tree.has_value(); }
};

struct StudyReport {
  std::uint64_t seed = 0;
  std::string provenance;
  std::size_t panel_rows = 0;
  std::vector<Exclusion> load_exclusions;
  std::vector<std::string> warnings;
  std::vector<ProxySpec> active_specs;
  std::optional<SelectionResult> selection;
  std::vector<SubsampleResult> subsamples;

  /// True when some subsample produced no tree.
  bool degraded() const;
};

/// Loads the panel named by the config, with betas attached when a returns
/// file is configured.
LoadResult load_configured_panel(const RunConfig& config, std::vector<std::string>* warnings = nullptr);

/// RF selection on the full panel over every configured proxy.
SelectionResult run_selection(const Panel& panel, const RunConfig& config);

/// Rescale, grow, prune and analyse every configured subsample of `panel`.
StudyReport run_study(const Panel& panel, const RunConfig& config);

/// Loads the data, runs the study and writes the bundle to config.output_dir.
StudyReport run_study(const RunConfig& config);

/// report.md, tables/*.csv, trees/*.dot, trees/*.json under `dir`.
void write_bundle(const StudyReport& report, const RunConfig& config, const std::filesystem::path& dir);

/// Fixed-width verdict table, one line per subsample.
std::string verdict_summary(const StudyReport& report);

/// Descriptive rows (variable, n, mean, std_dev, min, max) for Q and every raw proxy.
std::string summary_stats_csv(const Panel& panel);

}  // namespace charterseg
