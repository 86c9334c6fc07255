#include "charterseg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"

namespace charterseg {

bool LeafPath::matches(std::span<const double> row) const {
  for (const auto& step : steps) {
    const bool left = row[step.feature] < step.threshold;
    if (left != (step.side == Side::Left)) return false;
  }
  return true;
}

LeafPath path_to_leaf(const RegressionTree& tree, int leaf) {
  const auto& nodes = tree.nodes();
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= nodes.size() || !tree.node(leaf).is_leaf()) {
    throw DomainError("path_to_leaf: index is not a leaf");
  }
  std::vector<int> parent(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    parent[static_cast<std::size_t>(nodes[i].left)] = static_cast<int>(i);
    parent[static_cast<std::size_t>(nodes[i].right)] = static_cast<int>(i);
  }
  LeafPath path;
  for (int child = leaf, at = parent[static_cast<std::size_t>(leaf)]; at >= 0;
       child = at, at = parent[static_cast<std::size_t>(at)]) {
    const auto& node = tree.node(at);
    path.steps.push_back(
        {at, node.split.feature, node.split.threshold, child == node.left ? Side::Left : Side::Right});
  }
  std::reverse(path.steps.begin(), path.steps.end());
  const auto& node = tree.node(leaf);
  path.leaf = leaf;
  path.n = node.n;
  path.mean = node.mean;
  path.share = leaf_share(tree, leaf);
  return path;
}

ExtremeLeaves extreme_leaves(const RegressionTree& tree) {
  const auto idx = extreme_leaf_indices(tree);
  return {path_to_leaf(tree, idx.min_leaf), path_to_leaf(tree, idx.max_leaf)};
}

double leaf_share(const RegressionTree& tree, int leaf) {
  return static_cast<double>(tree.node(leaf).n) / static_cast<double>(tree.total_n());
}

std::string describe_path(const LeafPath& path, std::span<const std::string> names, int digits) {
  std::string out;
  for (const auto& step : path.steps) {
    if (!out.empty()) out += ", ";
    out += step.feature < names.size() ? names[step.feature] : "x" + std::to_string(step.feature);
    out += step.side == Side::Left ? " < " : " >= ";
    out += io::format_fixed(step.threshold, digits);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view verdict_label(Verdict v) {
  switch (v) {
    case Verdict::Aligned: return "Yes";
    case Verdict::Misaligned: return "No";
    case Verdict::NoEvidence: return "–";
    case Verdict::Ambiguous: return "Ambig";
  }
  return "?";
}

const FactorVerdict& AlignmentVerdicts::at(std::string_view factor) const {
  for (const auto& f : factors) {
    if (f.factor == factor) return f;
  }
  throw ConfigError("no verdict for factor '" + std::string(factor) + "'");
}

AlignmentVerdicts alignment_verdicts(const RegressionTree& tree, const ExtremeLeaves& paths,
                                     VerdictScope scope) {
  std::vector<int> considered;
  if (scope == VerdictScope::AllNodes) {
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
      if (!tree.nodes()[i].is_leaf()) considered.push_back(static_cast<int>(i));
    }
  } else {
    for (const auto* path : {&paths.min, &paths.max}) {
      for (const auto& step : path->steps) considered.push_back(step.node);
    }
    std::sort(considered.begin(), considered.end());
    considered.erase(std::unique(considered.begin(), considered.end()), considered.end());
  }

  AlignmentVerdicts out;
  for (std::size_t f = 0; f < tree.feature_names().size(); ++f) {
    FactorVerdict fv;
    fv.factor = tree.feature_names()[f];
    bool aligned = false;
    bool misaligned = false;
    for (int index : considered) {
      const auto& node = tree.node(index);
      if (node.split.feature != f) continue;
      NodeEvidence ev;
      ev.node = index;
      ev.threshold = node.split.threshold;
      ev.low_risk_mean = tree.node(node.left).mean;
      ev.high_risk_mean = tree.node(node.right).mean;
      if (ev.low_risk_mean > ev.high_risk_mean) {
        ev.evidence = Verdict::Aligned;
        aligned = true;
      } else if (ev.low_risk_mean < ev.high_risk_mean) {
        ev.evidence = Verdict::Misaligned;
        misaligned = true;
      }
      fv.nodes.push_back(ev);
    }
    if (aligned && misaligned) fv.verdict = Verdict::Ambiguous;
    else if (aligned) fv.verdict = Verdict::Aligned;
    else if (misaligned) fv.verdict = Verdict::Misaligned;
    else fv.verdict = Verdict::NoEvidence;
    out.factors.push_back(std::move(fv));
  }
  return out;
}

// ---------------------------------------------------------------------------

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  // For very small lambda the series converges too slowly; Q is 1 to double
  // precision there.
  if (lambda < 1e-3) return 1.0;
  const double a2 = -2.0 * lambda * lambda;
  double sum = 0;
  double sign = 1;
  for (int i = 1; i <= 100000; ++i) {
    const double term = sign * std::exp(a2 * static_cast<double>(i) * static_cast<double>(i));
    sum += term;
    if (std::abs(term) < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());

  // Sweep the pooled sample, advancing past every copy of the current value
  // before comparing the two step functions.
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }

  const double ne = nx * ny / (nx + ny);
  const double root = std::sqrt(ne);
  return {d, kolmogorov_q((root + 0.12 + 0.11 / root) * d)};
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson: lengths differ");
  if (x.size() < 3) throw DomainError("pearson: need at least three observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("pearson: zero variance");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2.0;
  if (std::abs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    const boost::math::students_t_distribution<double> dist(df);
    c.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  return c;
}

std::string_view significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

// ---------------------------------------------------------------------------

std::optional<Group> lower_risk_group(double mean_min, double mean_max, RiskDirection direction) {
  if (mean_min == mean_max) return std::nullopt;
  const bool min_higher = mean_min > mean_max;
  // Decreasing-in-risk: the higher raw mean is the safer group.
  const bool min_safer = direction == RiskDirection::DecreasingInRisk ? min_higher : !min_higher;
  return min_safer ? Group::QMin : Group::QMax;
}

GroupComparison group_comparison(std::span<const ComparisonInput> variables, double significance) {
  GroupComparison out;
  for (const auto& v : variables) {
    if (v.min_group.empty() || v.max_group.empty()) {
      throw DomainError("group_comparison: empty group for '" + v.name + "'");
    }
    ComparisonRow row;
    row.name = v.name;
    row.mean_min = std::accumulate(v.min_group.begin(), v.min_group.end(), 0.0) /
                   static_cast<double>(v.min_group.size());
    row.mean_max = std::accumulate(v.max_group.begin(), v.max_group.end(), 0.0) /
                   static_cast<double>(v.max_group.size());
    const auto ks = ks_two_sample(v.min_group, v.max_group);
    row.d = ks.d;
    row.p = ks.p;
    row.stars = std::string(significance_stars(ks.p));
    row.higher_mean_q = row.mean_min > row.mean_max ? Group::QMin : Group::QMax;
    if (v.direction && ks.p < significance) {
      row.lower_risk = lower_risk_group(row.mean_min, row.mean_max, *v.direction);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace charterseg
