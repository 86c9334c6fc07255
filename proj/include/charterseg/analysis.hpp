#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "charterseg/rescale.hpp"
#include "charterseg/tree.hpp"

namespace charterseg {

// ---------------------------------------------------------------------------
// Leaf paths

enum class Side { Left, Right };  ///< Left: value < threshold, Right: value >= threshold

struct PathStep {
  int node = 0;
  std::size_t feature = 0;
  double threshold = 0;
  Side side = Side::Left;
};

struct LeafPath {
  std::vector<PathStep> steps;
  int leaf = 0;
  std::size_t n = 0;
  double mean = 0;
  double share = 0;  ///< n / rows at the root

  /// True when `row` satisfies every condition on the path.
  bool matches(std::span<const double> row) const;
};

struct ExtremeLeaves {
  LeafPath min;  ///< Q^Min
  LeafPath max;  ///< Q^Max
};

LeafPath path_to_leaf(const RegressionTree& tree, int leaf);

/// Paths to the leaves with the lowest and highest mean Q. Ties go to the
/// larger leaf, then to the leftmost one.
ExtremeLeaves extreme_leaves(const RegressionTree& tree);

/// Fraction of the training rows that reach `leaf`.
double leaf_share(const RegressionTree& tree, int leaf);

/// Human-readable path, e.g. "C < 1.986, S < 3.140, L >= 2.446".
std::string describe_path(const LeafPath& path, std::span<const std::string> names, int digits = 3);

// ---------------------------------------------------------------------------
// Alignment

enum class Verdict { Aligned, Misaligned, NoEvidence, Ambiguous };

/// "Yes", "No", "–" and "Ambig".
std::string_view verdict_label(Verdict v);

struct NodeEvidence {
  int node = 0;
  double threshold = 0;
  double low_risk_mean = 0;   ///< mean Q of the child with score < threshold
  double high_risk_mean = 0;  ///< mean Q of the child with score >= threshold
  Verdict evidence = Verdict::NoEvidence;
};

struct FactorVerdict {
  std::string factor;
  Verdict verdict = Verdict::NoEvidence;
  std::vector<NodeEvidence> nodes;
};

struct AlignmentVerdicts {
  std::vector<FactorVerdict> factors;

  /// Throws ConfigError when `factor` is not in the set.
  const FactorVerdict& at(std::string_view factor) const;
};

enum class VerdictScope { Paths, AllNodes };

/// For each splitting node considered (those on the Q^Min/Q^Max paths, or every
/// internal node), the child on the low-risk side carrying the higher mean Q
/// is evidence of alignment and the opposite of misalignment. Conflicting
/// evidence for a factor is Ambiguous; no node is NoEvidence. Child means are
/// the node statistics, i.e. weighted over all descendant leaves.
AlignmentVerdicts alignment_verdicts(const RegressionTree& tree, const ExtremeLeaves& paths,
                                     VerdictScope scope = VerdictScope::Paths);

// ---------------------------------------------------------------------------
// Tests

struct KsResult {
  double d = 0;
  double p = 1;
};

/// Kolmogorov survival function Q_KS(lambda) = 2 sum (-1)^(i-1) exp(-2 i^2 lambda^2),
/// clamped to [0, 1].
double kolmogorov_q(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// Q_KS((sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) D), ne = n m / (n + m).
/// Throws DomainError for an empty sample.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct Correlation {
  double r = 0;
  double p = 1;
  std::size_t n = 0;
};

/// Pearson r with a two-sided p-value from Student's t on n - 2 degrees of
/// freedom. Throws DomainError when n < 3 or lengths differ, DegenerateError
/// on zero variance.
Correlation pearson(std::span<const double> x, std::span<const double> y);

/// "***", "**", "*" at the 1%, 5% and 10% levels, else "".
std::string_view significance_stars(double p);

// ---------------------------------------------------------------------------
// Group comparison

enum class Group { QMin, QMax };

struct ComparisonInput {
  std::string name;
  std::vector<double> min_group;  ///< values of the rows in the Q^Min leaf
  std::vector<double> max_group;  ///< values of the rows in the Q^Max leaf
  /// Raw risk direction; absent for Q itself.
  std::optional<RiskDirection> direction;
};

struct ComparisonRow {
  std::string name;
  double mean_min = 0;
  double mean_max = 0;
  double d = 0;
  double p = 1;
  std::string stars;
  Group higher_mean_q = Group::QMax;
  /// Group with the lower risk, reported only when the KS null is rejected.
  std::optional<Group> lower_risk;
};

struct GroupComparison {
  std::vector<ComparisonRow> rows;
};

/// The group whose mean implies lower risk under `direction`, or none on a tie.
std::optional<Group> lower_risk_group(double mean_min, double mean_max, RiskDirection direction);

/// Means, KS statistic and stars per variable, on raw (unrescaled) values.
/// Throws DomainError when a group is empty.
GroupComparison group_comparison(std::span<const ComparisonInput> variables,
                                 double significance = 0.10);

}  // namespace charterseg
