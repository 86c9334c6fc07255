#include "charterseg/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"
#include "charterseg/parallel.hpp"

namespace charterseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// A split must remove more than this fraction of the node's SSE. Guards
// against splitting on round-off.
constexpr double kRelativeGainFloor = 1e-12;

// Gains this close (relative to the larger of the best gain and the node SSE)
// are ties.
constexpr double kRelativeGainTie = 1e-12;

// Collapse candidates whose link strength differs by less than this relative
// amount are treated as one pruning step.
constexpr double kAlphaMergeTolerance = 1e-10;

NodeStats stats_of(const TrainingView& data, std::span<const std::size_t> rows) {
  const double n = static_cast<double>(rows.size());
  double sum = 0;
  for (auto r : rows) sum += data.response[r];
  const double mean = sum / n;
  double sse = 0;
  for (auto r : rows) {
    const double d = data.response[r] - mean;
    sse += d * d;
  }
  return {mean, sse};
}

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

}  // namespace

// ---------------------------------------------------------------------------

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, std::vector<std::string> feature_names,
                               TreeParams params)
    : nodes_(std::move(nodes)), feature_names_(std::move(feature_names)), params_(params) {
  if (nodes_.empty()) throw EmptyModelError("regression tree without nodes");
}

std::vector<int> RegressionTree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
  }
  return out;  // preorder lists leaves left to right
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t RegressionTree::depth() const {
  std::function<std::size_t(int)> visit = [&](int i) -> std::size_t {
    const auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.is_leaf()) return 0;
    return 1 + std::max(visit(node.left), visit(node.right));
  };
  return visit(0);
}

int RegressionTree::leaf_for(std::span<const double> row) const {
  int at = 0;
  while (!nodes_[static_cast<std::size_t>(at)].is_leaf()) {
    const auto& node = nodes_[static_cast<std::size_t>(at)];
    at = node.split.goes_left(row) ? node.left : node.right;
  }
  return at;
}

std::vector<double> RegressionTree::predict(const TrainingView& data) const {
  std::vector<double> out(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    out[r] = predict(data.features.subspan(r * data.num_features, data.num_features));
  }
  return out;
}

bool RegressionTree::structurally_equal(const RegressionTree& other, double tolerance) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  auto close = [tolerance](double a, double b) {
    return a == b || std::abs(a - b) <= tolerance * std::max({1.0, std::abs(a), std::abs(b)});
  };
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.left != b.left || a.right != b.right || a.n != b.n) return false;
    if (!a.is_leaf() && !(a.split == b.split)) return false;
    if (!close(a.mean, b.mean) || !close(a.sse, b.sse)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

NodeStats node_sse(std::span<const double> responses) {
  if (responses.empty()) throw DomainError("node_sse: empty node");
  const double n = static_cast<double>(responses.size());
  const double mean = std::accumulate(responses.begin(), responses.end(), 0.0) / n;
  double sse = 0;
  for (double y : responses) sse += (y - mean) * (y - mean);
  return {mean, sse};
}

std::optional<SplitCandidate> best_split(const TrainingView& data,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> features,
                                         std::size_t min_leaf) {
  min_leaf = std::max<std::size_t>(min_leaf, 1);
  const std::size_t n = rows.size();
  if (n < 2 * min_leaf) return std::nullopt;

  const double y0 = data.response[rows.front()];
  if (std::all_of(rows.begin(), rows.end(), [&](auto r) { return data.response[r] == y0; })) {
    return std::nullopt;
  }
  const NodeStats parent = stats_of(data, rows);

  // Work on centered responses: gain = sL^2/nL + sR^2/nR - s^2/n.
  std::vector<std::pair<double, double>> sorted(n);
  double total = 0;
  for (auto r : rows) total += data.response[r] - parent.mean;
  const double nd = static_cast<double>(n);
  const double base = total * total / nd;

  // Candidates in scan order: feature ascending, then threshold ascending.
  std::vector<SplitCandidate> candidates;
  double best_gain = -kInf;

  for (std::size_t f : features) {
    for (std::size_t i = 0; i < n; ++i) {
      sorted[i] = {data.at(rows[i], f), data.response[rows[i]] - parent.mean};
    }
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front().first == sorted.back().first) continue;

    double left_sum = 0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      left_sum += sorted[k].second;
      if (sorted[k].first == sorted[k + 1].first) continue;
      const std::size_t n_left = k + 1;
      if (n_left < min_leaf) continue;
      if (n - n_left < min_leaf) break;
      const double nl = static_cast<double>(n_left);
      const double nr = nd - nl;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
      best_gain = std::max(best_gain, gain);
      candidates.push_back({{f, midpoint(sorted[k].first, sorted[k + 1].first)}, gain});
    }
  }
  if (candidates.empty() || !(best_gain > kRelativeGainFloor * parent.sse)) return std::nullopt;

  // Different columns can induce the same partition; their gains then differ
  // only by rounding and must count as tied.
  const double tolerance = kRelativeGainTie * std::max(std::abs(best_gain), parent.sse);
  std::optional<SplitCandidate> best;
  for (const auto& c : candidates) {
    if (c.gain >= best_gain - tolerance) {
      best = c;
      break;
    }
  }
  return best;
}

std::optional<SplitCandidate> best_split(const TrainingView& data, std::size_t min_leaf) {
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::size_t> features(data.num_features);
  std::iota(features.begin(), features.end(), 0);
  return best_split(data, rows, features, min_leaf);
}

// ---------------------------------------------------------------------------

namespace {

class Grower {
 public:
  Grower(const TrainingView& data, const GrowOptions& options)
      : data_(data), options_(options), all_features_(data.num_features) {
    std::iota(all_features_.begin(), all_features_.end(), 0);
    if (options.subsampler) {
      const auto mtry = options.subsampler->mtry;
      if (mtry < 1 || mtry > data.num_features) throw ConfigError("mtry must be in [1, m]");
      if (!options.subsampler->rng) throw ConfigError("feature subsampler without a random stream");
    }
  }

  std::vector<TreeNode> run(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    build(0, rows_.size(), 0);
    return std::move(nodes_);
  }

 private:
  std::vector<std::size_t> candidate_features() {
    if (!options_.subsampler || options_.subsampler->mtry == data_.num_features) {
      return all_features_;
    }
    // Partial Fisher-Yates, then sort so the tie rule sees ascending indices.
    std::vector<std::size_t> pool = all_features_;
    Rng& rng = *options_.subsampler->rng;
    const std::size_t mtry = options_.subsampler->mtry;
    for (std::size_t i = 0; i < mtry; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.index(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(mtry);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  int build(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::span<const std::size_t> rows(rows_.data() + begin, end - begin);
    const NodeStats stats = stats_of(data_, rows);
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{-1, -1, {}, rows.size(), stats.mean, stats.sse});

    const auto& params = options_.params;
    if (params.max_depth && depth >= *params.max_depth) return index;
    if (rows.size() < 2 * params.min_leaf) return index;

    const auto features = candidate_features();
    const auto split = best_split(data_, rows, features, params.min_leaf);
    if (!split) return index;

    const auto middle = std::stable_partition(
        rows_.begin() + static_cast<std::ptrdiff_t>(begin),
        rows_.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return data_.at(r, split->rule.feature) < split->rule.threshold; });
    const auto mid = static_cast<std::size_t>(middle - rows_.begin());

    nodes_[static_cast<std::size_t>(index)].split = split->rule;
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
    return index;
  }

  const TrainingView& data_;
  const GrowOptions& options_;
  std::vector<std::size_t> all_features_;
  std::vector<std::size_t> rows_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RegressionTree grow(const TrainingView& data, std::vector<std::string> feature_names,
                    const GrowOptions& options) {
  if (feature_names.size() != data.num_features) {
    throw ConfigError("grow: feature name count does not match the matrix");
  }
  std::vector<std::size_t> rows;
  if (options.rows.empty()) {
    rows.resize(data.rows());
    std::iota(rows.begin(), rows.end(), 0);
  } else {
    rows.assign(options.rows.begin(), options.rows.end());
  }
  const std::size_t min_leaf = std::max<std::size_t>(options.params.min_leaf, 1);
  if (rows.empty() || rows.size() < min_leaf) {
    throw EmptyModelError("grow: " + std::to_string(rows.size()) +
                          " rows is fewer than min_leaf = " + std::to_string(min_leaf));
  }
  GrowOptions effective = options;
  effective.params.min_leaf = min_leaf;
  Grower grower(data, effective);
  return RegressionTree(grower.run(std::move(rows)), std::move(feature_names), effective.params);
}

RegressionTree grow(const ScoredMatrix& matrix, const TreeParams& params) {
  GrowOptions options;
  options.params = params;
  return grow(TrainingView::of(matrix), matrix.feature_names, options);
}

// ---------------------------------------------------------------------------
// Pruning

PruneSequence cost_complexity_sequence(const RegressionTree& tree) {
  const auto& nodes = tree.nodes();
  const std::size_t count = nodes.size();
  PruneSequence seq;
  seq.collapse_alpha.assign(count, kInf);
  if (tree.root().is_leaf()) return seq;

  std::vector<char> internal(count);
  for (std::size_t i = 0; i < count; ++i) internal[i] = !nodes[i].is_leaf();

  std::vector<double> subtree_sse(count);
  std::vector<std::size_t> subtree_leaves(count);

  auto collapse = [&](std::size_t t, double alpha) {
    std::vector<std::size_t> stack{t};
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      if (!internal[i]) continue;
      internal[i] = 0;
      seq.collapse_alpha[i] = alpha;
      stack.push_back(static_cast<std::size_t>(nodes[i].left));
      stack.push_back(static_cast<std::size_t>(nodes[i].right));
    }
  };

  while (internal[0]) {
    // Children follow parents in preorder, so a reverse sweep is bottom-up.
    for (std::size_t i = count; i-- > 0;) {
      if (!internal[i]) {
        subtree_sse[i] = nodes[i].sse;
        subtree_leaves[i] = 1;
      } else {
        const auto l = static_cast<std::size_t>(nodes[i].left);
        const auto r = static_cast<std::size_t>(nodes[i].right);
        subtree_sse[i] = subtree_sse[l] + subtree_sse[r];
        subtree_leaves[i] = subtree_leaves[l] + subtree_leaves[r];
      }
    }
    std::vector<double> link(count, kInf);
    double weakest = kInf;
    for (std::size_t i = 0; i < count; ++i) {
      if (!internal[i]) continue;
      link[i] = (nodes[i].sse - subtree_sse[i]) / static_cast<double>(subtree_leaves[i] - 1);
      weakest = std::min(weakest, link[i]);
    }
    double alpha = std::max(weakest, 0.0);
    const bool merge = !seq.alphas.empty() &&
                       alpha <= seq.alphas.back() * (1.0 + kAlphaMergeTolerance);
    if (merge) alpha = seq.alphas.back();

    const double cutoff = weakest + kAlphaMergeTolerance * std::abs(weakest);
    for (std::size_t i = 0; i < count; ++i) {
      if (internal[i] && link[i] <= cutoff) collapse(i, alpha);
    }

    std::size_t leaves = 0;
    {
      std::vector<std::size_t> stack{0};
      while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        if (!internal[i]) {
          ++leaves;
          continue;
        }
        stack.push_back(static_cast<std::size_t>(nodes[i].left));
        stack.push_back(static_cast<std::size_t>(nodes[i].right));
      }
    }
    if (merge) {
      seq.leaf_counts.back() = leaves;
    } else {
      seq.alphas.push_back(alpha);
      seq.leaf_counts.push_back(leaves);
    }
  }
  return seq;
}

RegressionTree prune(const RegressionTree& tree, const PruneSequence& sequence, double alpha) {
  const auto& nodes = tree.nodes();
  if (sequence.collapse_alpha.size() != nodes.size()) {
    throw ConfigError("prune: sequence does not belong to this tree");
  }
  std::vector<TreeNode> out;
  out.reserve(nodes.size());
  std::function<int(std::size_t)> copy = [&](std::size_t i) -> int {
    const int index = static_cast<int>(out.size());
    TreeNode node = nodes[i];
    const bool keep_split = !node.is_leaf() && sequence.collapse_alpha[i] > alpha;
    node.left = node.right = -1;
    if (!keep_split) node.split = {};
    out.push_back(node);
    if (keep_split) {
      const int l = copy(static_cast<std::size_t>(nodes[i].left));
      const int r = copy(static_cast<std::size_t>(nodes[i].right));
      out[static_cast<std::size_t>(index)].left = l;
      out[static_cast<std::size_t>(index)].right = r;
    }
    return index;
  };
  copy(0);
  return RegressionTree(std::move(out), tree.feature_names(), tree.params());
}

RegressionTree prune(const RegressionTree& tree, double alpha) {
  return prune(tree, cost_complexity_sequence(tree), alpha);
}

std::string_view prune_rule_name(PruneRule rule) {
  return rule == PruneRule::MinCv ? "min-cv" : "one-se";
}

PruneRule parse_prune_rule(std::string_view text) {
  if (text == "min-cv") return PruneRule::MinCv;
  if (text == "one-se") return PruneRule::OneSe;
  throw ConfigError("unknown prune rule '" + std::string(text) + "'");
}

std::vector<std::size_t> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2");
  if (k > n) throw ConfigError("cross-validation: k = " + std::to_string(k) + " exceeds n = " +
                               std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = pos % k;
  return fold;
}

namespace {

// Prediction of the subtree pruned at `alpha`: the first node on the row's
// path that is collapsed at that complexity.
double pruned_prediction(const RegressionTree& tree, const PruneSequence& seq,
                         std::span<const double> row, double alpha) {
  int at = 0;
  for (;;) {
    const auto& node = tree.node(at);
    if (node.is_leaf() || seq.collapse_alpha[static_cast<std::size_t>(at)] <= alpha) {
      return node.mean;
    }
    at = node.split.goes_left(row) ? node.left : node.right;
  }
}

}  // namespace

PrunedTree cv_prune(const TrainingView& data, const std::vector<std::string>& feature_names,
                    const TreeParams& params, const CvOptions& options) {
  const std::size_t n = data.rows();
  const auto folds = make_folds(n, options.folds, options.seed);

  GrowOptions grow_options;
  grow_options.params = params;
  RegressionTree full = grow(data, feature_names, grow_options);
  const PruneSequence full_seq = cost_complexity_sequence(full);

  PruneTrace trace;
  trace.fold_of_row = folds;
  // Subtree k is optimal on [alpha_k, alpha_{k+1}); evaluate at the geometric
  // midpoint of that interval.
  trace.alphas.push_back(0.0);
  for (std::size_t k = 0; k < full_seq.alphas.size(); ++k) {
    const bool last = k + 1 == full_seq.alphas.size();
    trace.alphas.push_back(last ? full_seq.alphas[k]
                                : std::sqrt(full_seq.alphas[k] * full_seq.alphas[k + 1]));
  }
  const std::size_t num_alphas = trace.alphas.size();

  std::vector<std::vector<double>> row_errors(num_alphas, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> fold_mse(options.folds, std::vector<double>(num_alphas, 0.0));

  parallel_for(options.folds, options.jobs, [&](std::size_t f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t r = 0; r < n; ++r) (folds[r] == f ? test : train).push_back(r);
    GrowOptions fold_options;
    fold_options.params = params;
    fold_options.rows = train;
    const RegressionTree fold_tree = grow(data, feature_names, fold_options);
    const PruneSequence fold_seq = cost_complexity_sequence(fold_tree);
    for (std::size_t a = 0; a < num_alphas; ++a) {
      double sum = 0;
      for (auto r : test) {
        const auto row = data.features.subspan(r * data.num_features, data.num_features);
        const double e = data.response[r] - pruned_prediction(fold_tree, fold_seq, row, trace.alphas[a]);
        row_errors[a][r] = e * e;
        sum += e * e;
      }
      fold_mse[f][a] = test.empty() ? 0.0 : sum / static_cast<double>(test.size());
    }
  });

  trace.cv_mse.assign(num_alphas, std::vector<double>(options.folds));
  const double nd = static_cast<double>(n);
  for (std::size_t a = 0; a < num_alphas; ++a) {
    for (std::size_t f = 0; f < options.folds; ++f) trace.cv_mse[a][f] = fold_mse[f][a];
    double sum = 0;
    for (double e : row_errors[a]) sum += e;
    const double mean = sum / nd;
    double ss = 0;
    for (double e : row_errors[a]) ss += (e - mean) * (e - mean);
    trace.cv_mean.push_back(mean);
    trace.cv_se.push_back(n > 1 ? std::sqrt(ss / (nd - 1.0) / nd) : 0.0);
    trace.subtree_sizes.push_back(a == 0 ? full.leaf_count() : full_seq.leaf_counts[a - 1]);
  }

  std::size_t best = 0;
  for (std::size_t a = 1; a < num_alphas; ++a) {
    if (trace.cv_mean[a] <= trace.cv_mean[best]) best = a;  // ties favour the smaller tree
  }
  if (options.rule == PruneRule::OneSe) {
    const double limit = trace.cv_mean[best] + trace.cv_se[best];
    for (std::size_t a = num_alphas; a-- > best;) {
      if (trace.cv_mean[a] <= limit) {
        best = a;
        break;
      }
    }
  }
  trace.chosen_index = best;
  trace.chosen_alpha = trace.alphas[best];

  PrunedTree out{prune(full, full_seq, trace.chosen_alpha), std::move(full), std::move(trace)};
  return out;
}

PrunedTree cv_prune(const ScoredMatrix& matrix, const TreeParams& params,
                    const CvOptions& options) {
  return cv_prune(TrainingView::of(matrix), matrix.feature_names, params, options);
}

// ---------------------------------------------------------------------------

ExtremeLeafIndices extreme_leaf_indices(const RegressionTree& tree) {
  const auto leaves = tree.leaves();
  ExtremeLeafIndices out{leaves.front(), leaves.front()};
  for (int leaf : leaves) {
    const auto& node = tree.node(leaf);
    const auto& lo = tree.node(out.min_leaf);
    const auto& hi = tree.node(out.max_leaf);
    if (node.mean < lo.mean || (node.mean == lo.mean && node.n > lo.n)) out.min_leaf = leaf;
    if (node.mean > hi.mean || (node.mean == hi.mean && node.n > hi.n)) out.max_leaf = leaf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string dot_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string export_dot(const RegressionTree& tree, std::span<const std::string> labels) {
  auto name_of = [&](std::size_t feature) -> std::string {
    if (feature < labels.size()) return labels[feature];
    if (feature < tree.feature_names().size()) return tree.feature_names()[feature];
    return "x" + std::to_string(feature);
  };
  const auto extremes = extreme_leaf_indices(tree);

  std::string out = "digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const auto& node = tree.nodes()[i];
    std::string label;
    std::string attrs;
    if (node.is_leaf()) {
      label = "n = " + std::to_string(node.n) + "\\nQ = " + io::format_fixed(node.mean, 3);
      if (static_cast<int>(i) == extremes.min_leaf) label += "\\nQ^Min";
      if (static_cast<int>(i) == extremes.max_leaf) label += "\\nQ^Max";
      attrs = ", shape=ellipse";
    } else {
      label = dot_escape(name_of(node.split.feature)) + " < " +
              io::format_fixed(node.split.threshold, 3);
    }
    out += "  n" + std::to_string(i) + " [label=\"" + label + "\"" + attrs + "];\n";
  }
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const auto& node = tree.nodes()[i];
    if (node.is_leaf()) continue;
    out += "  n" + std::to_string(i) + " -> n" + std::to_string(node.left) + " [label=\"yes\"];\n";
    out += "  n" + std::to_string(i) + " -> n" + std::to_string(node.right) + " [label=\"no\"];\n";
  }
  out += "}\n";
  return out;
}

namespace {

using nlohmann::json;

json node_to_json(const RegressionTree& tree, int index) {
  const auto& node = tree.node(index);
  json j;
  j["kind"] = node.is_leaf() ? "leaf" : "split";
  j["n"] = node.n;
  j["mean"] = node.mean;
  j["sse"] = node.sse;
  if (!node.is_leaf()) {
    j["feature"] = node.split.feature;
    if (node.split.feature < tree.feature_names().size()) {
      j["feature_name"] = tree.feature_names()[node.split.feature];
    }
    j["threshold"] = node.split.threshold;
    j["left"] = node_to_json(tree, node.left);
    j["right"] = node_to_json(tree, node.right);
  }
  return j;
}

struct JsonImporter {
  std::size_t num_features = 0;
  std::size_t min_leaf = 1;
  std::vector<TreeNode> nodes;

  static double number(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw ParseError(std::string("tree json: missing numeric field '") + key + "'");
    }
    return j[key].get<double>();
  }

  static std::size_t count(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_unsigned()) {
      throw ParseError(std::string("tree json: missing non-negative integer '") + key + "'");
    }
    return j[key].get<std::size_t>();
  }

  int read(const json& j, std::size_t depth) {
    if (depth > 10000) throw ParseError("tree json: nesting too deep");
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
      throw ParseError("tree json: node without 'kind'");
    }
    const auto kind = j["kind"].get<std::string>();
    TreeNode node;
    node.n = count(j, "n");
    node.mean = number(j, "mean");
    node.sse = number(j, "sse");
    if (node.n == 0) throw ParseError("tree json: node with n = 0");
    if (!(node.sse >= 0.0)) throw ParseError("tree json: negative sse");
    const int index = static_cast<int>(nodes.size());
    if (kind == "leaf") {
      if (node.n < min_leaf) throw ParseError("tree json: leaf smaller than min_leaf");
      nodes.push_back(node);
      return index;
    }
    if (kind != "split") throw ParseError("tree json: unknown node kind '" + kind + "'");
    node.split.feature = count(j, "feature");
    node.split.threshold = number(j, "threshold");
    if (node.split.feature >= num_features) throw ParseError("tree json: feature index out of range");
    if (!j.contains("left") || !j.contains("right")) throw ParseError("tree json: split without children");
    nodes.push_back(node);
    const int left = read(j["left"], depth + 1);
    const int right = read(j["right"], depth + 1);
    auto& self = nodes[static_cast<std::size_t>(index)];
    self.left = left;
    self.right = right;
    const auto& l = nodes[static_cast<std::size_t>(left)];
    const auto& r = nodes[static_cast<std::size_t>(right)];
    if (l.n + r.n != self.n) throw ParseError("tree json: child counts do not add up to the parent");
    return index;
  }
};

}  // namespace

std::string export_json(const RegressionTree& tree) {
  json doc;
  doc["format"] = "charterseg-tree";
  doc["version"] = 1;
  doc["feature_names"] = tree.feature_names();
  doc["params"]["min_leaf"] = tree.params().min_leaf;
  doc["params"]["max_depth"] =
      tree.params().max_depth ? json(*tree.params().max_depth) : json(nullptr);
  doc["params"]["total_n"] = tree.total_n();
  doc["root"] = node_to_json(tree, 0);
  return doc.dump(2) + "\n";
}

RegressionTree import_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("tree json: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("tree json: document is not an object");
  if (!doc.contains("feature_names") || !doc["feature_names"].is_array()) {
    throw ParseError("tree json: missing feature_names");
  }
  if (!doc.contains("root")) throw ParseError("tree json: missing root");

  std::vector<std::string> names;
  for (const auto& n : doc["feature_names"]) {
    if (!n.is_string()) throw ParseError("tree json: feature names must be strings");
    names.push_back(n.get<std::string>());
  }
  TreeParams params;
  if (doc.contains("params") && doc["params"].is_object()) {
    const auto& p = doc["params"];
    if (p.contains("min_leaf")) params.min_leaf = JsonImporter::count(p, "min_leaf");
    if (p.contains("max_depth") && !p["max_depth"].is_null()) {
      params.max_depth = JsonImporter::count(p, "max_depth");
    }
  }
  JsonImporter importer{names.size(), std::max<std::size_t>(params.min_leaf, 1), {}};
  importer.read(doc["root"], 0);
  return RegressionTree(std::move(importer.nodes), std::move(names), params);
}

}  // namespace charterseg
