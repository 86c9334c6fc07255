#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "charterseg/random.hpp"
#include "charterseg/rescale.hpp"

namespace charterseg {

/// Row-major feature matrix with responses. Non-owning.
struct TrainingView {
  std::span<const double> features;  ///< n x m, row-major
  std::span<const double> response;  ///< n
  std::size_t num_features = 0;

  static TrainingView of(const ScoredMatrix& matrix) {
    return {matrix.scores, matrix.response, matrix.cols()};
  }
  std::size_t rows() const { return response.size(); }
  double at(std::size_t row, std::size_t feature) const {
    return features[row * num_features + feature];
  }
};

/// Rows with value < threshold go left, the rest go right.
struct SplitRule {
  std::size_t feature = 0;
  double threshold = 0;

  bool goes_left(std::span<const double> row) const { return row[feature] < threshold; }
  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

/// Node statistics are kept on internal nodes too; pruning turns an internal
/// node into a leaf without recomputation.
struct TreeNode {
  int left = -1;
  int right = -1;
  SplitRule split;
  std::size_t n = 0;
  double mean = 0;
  double sse = 0;

  bool is_leaf() const { return left < 0; }
};

struct TreeParams {
  std::size_t min_leaf = 30;
  std::optional<std::size_t> max_depth;
};

/// Binary regression tree stored in preorder (a node precedes its left
/// subtree, which precedes its right subtree). nodes()[0] is the root.
class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, std::vector<std::string> feature_names,
                 TreeParams params);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }
  const TreeNode& root() const { return nodes_.front(); }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const TreeParams& params() const { return params_; }
  std::size_t total_n() const { return nodes_.empty() ? 0 : nodes_.front().n; }

  /// Leaf indices, left to right.
  std::vector<int> leaves() const;
  std::size_t leaf_count() const;
  std::size_t depth() const;
  /// Index of the leaf reached by `row`.
  int leaf_for(std::span<const double> row) const;
  double predict(std::span<const double> row) const { return node(leaf_for(row)).mean; }
  std::vector<double> predict(const TrainingView& data) const;

  /// Same topology, same splits, counts equal and stats within `tolerance`.
  bool structurally_equal(const RegressionTree& other, double tolerance = 0.0) const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::string> feature_names_;
  TreeParams params_;
};

struct NodeStats {
  double mean = 0;
  double sse = 0;
};

/// Mean and within sum of squares. Throws DomainError on empty input.
NodeStats node_sse(std::span<const double> responses);

struct SplitCandidate {
  SplitRule rule;
  double gain = 0;  ///< SSE(parent) - SSE(left) - SSE(right)
};

/// Best variance-reducing split of `rows` over the `features` candidates.
/// Thresholds are midpoints between consecutive distinct values. Returns
/// nothing when no split leaves min_leaf rows on both sides with positive
/// gain. Ties go to the lowest feature index, then the smallest threshold.
/// `features` must be ascending.
std::optional<SplitCandidate> best_split(const TrainingView& data,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> features,
                                         std::size_t min_leaf);

/// All rows, all features.
std::optional<SplitCandidate> best_split(const TrainingView& data, std::size_t min_leaf);

/// Random feature subset per node, for forests.
struct FeatureSubsampler {
  std::size_t mtry = 0;
  Rng* rng = nullptr;
};

struct GrowOptions {
  TreeParams params;
  /// Row multiset to train on (defaults to every row once).
  std::span<const std::size_t> rows;
  std::optional<FeatureSubsampler> subsampler;
};

/// Recursive partitioning until no admissible split remains or the depth
/// limit is hit. Throws EmptyModelError when fewer than min_leaf rows.
RegressionTree grow(const TrainingView& data, std::vector<std::string> feature_names,
                    const GrowOptions& options);
RegressionTree grow(const ScoredMatrix& matrix, const TreeParams& params = {});

// ---------------------------------------------------------------------------
// Pruning

/// Weakest-link pruning sequence. `alphas` strictly ascend; collapsing every
/// internal node whose collapse alpha is <= alphas[k] yields subtree k.
struct PruneSequence {
  std::vector<double> alphas;
  std::vector<std::size_t> leaf_counts;  ///< leaves after each step
  /// Per node: alpha at which it stops being internal (+inf for leaves, 0 never).
  std::vector<double> collapse_alpha;
};

/// Empty sequence for a single-leaf tree.
PruneSequence cost_complexity_sequence(const RegressionTree& tree);

/// Smallest optimal subtree at complexity `alpha`.
RegressionTree prune(const RegressionTree& tree, const PruneSequence& sequence, double alpha);
RegressionTree prune(const RegressionTree& tree, double alpha);

enum class PruneRule { MinCv, OneSe };
std::string_view prune_rule_name(PruneRule rule);
PruneRule parse_prune_rule(std::string_view text);

struct PruneTrace {
  std::vector<double> alphas;           ///< candidate alphas evaluated (first is 0)
  std::vector<std::size_t> subtree_sizes;  ///< leaves of the full-data subtree per alpha
  std::vector<std::vector<double>> cv_mse;  ///< [alpha][fold]
  std::vector<double> cv_mean;          ///< pooled squared error / n per alpha
  std::vector<double> cv_se;
  std::size_t chosen_index = 0;
  double chosen_alpha = 0;
  std::vector<std::size_t> fold_of_row;
};

struct CvOptions {
  std::size_t folds = 10;
  PruneRule rule = PruneRule::MinCv;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

struct PrunedTree {
  RegressionTree tree;
  RegressionTree unpruned;
  PruneTrace trace;
};

/// k-fold cross-validated cost-complexity pruning. Folds are a seeded random
/// partition with sizes differing by at most one. Throws ConfigError when
/// k < 2 or k > n.
PrunedTree cv_prune(const TrainingView& data, const std::vector<std::string>& feature_names,
                    const TreeParams& params, const CvOptions& options);
PrunedTree cv_prune(const ScoredMatrix& matrix, const TreeParams& params,
                    const CvOptions& options);

/// Seeded partition of n rows into k folds.
std::vector<std::size_t> make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

struct ExtremeLeafIndices {
  int min_leaf = 0;
  int max_leaf = 0;
};

/// Leaves with the lowest and highest mean. Ties go to the larger leaf, then
/// to the leftmost one.
ExtremeLeafIndices extreme_leaf_indices(const RegressionTree& tree);

// ---------------------------------------------------------------------------
// Export

/// Graphviz rendering. Internal nodes read "name < threshold" with the left
/// edge meaning the condition holds; leaves show n and mean Q, and the
/// extreme leaves are tagged Q^Min / Q^Max. `labels` overrides feature names.
std::string export_dot(const RegressionTree& tree, std::span<const std::string> labels = {});

/// Lossless JSON document (thresholds and stats at full precision).
std::string export_json(const RegressionTree& tree);
/// Throws ParseError on malformed or inconsistent input.
RegressionTree import_json(std::string_view text);

}  // namespace charterseg
