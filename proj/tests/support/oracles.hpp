#pragma once

// Independent reference implementations used by the tests. They are written
// the slow, obvious way on purpose and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "charterseg/random.hpp"
#include "charterseg/tree.hpp"

namespace oracle {

/// Owning n x m matrix with a response, convertible to a TrainingView.
struct Matrix {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> x;  // row-major
  std::vector<double> y;

  double at(std::size_t r, std::size_t f) const { return x[r * m + f]; }
  charterseg::TrainingView view() const { return {x, y, m}; }
};

/// Random matrix whose features take values on a coarse grid (so ties and
/// repeated values are common). With `duplicate` the last column copies column 0.
inline Matrix random_matrix(charterseg::Rng& rng, std::size_t n, std::size_t m, bool duplicate) {
  Matrix mat;
  mat.n = n;
  mat.m = m;
  mat.x.resize(n * m);
  mat.y.resize(n);
  std::vector<int> levels(m);
  for (auto& l : levels) l = 2 + static_cast<int>(rng.index(30));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < m; ++f) {
      mat.x[r * m + f] = 1.0 + 4.0 * static_cast<double>(rng.index(levels[f])) / (levels[f] - 1);
    }
    if (duplicate && m > 1) mat.x[r * m + m - 1] = mat.x[r * m];
    const double signal = mat.x[r * m] > 3.0 ? 1.0 : 0.0;
    mat.y[r] = signal + rng.normal();
  }
  return mat;
}

inline double sse_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double s = 0;
  for (double a : v) s += (a - mean) * (a - mean);
  return s;
}

struct BruteSplit {
  std::size_t feature = 0;
  double threshold = 0;
  double gain = 0;
};

/// Enumerates every feature and every midpoint between consecutive distinct
/// values, computing child SSEs by direct two-pass summation. Among candidates
/// whose gain is within a relative 1e-12 of the best, the lowest feature and
/// then the smallest threshold wins. A split must leave min_leaf rows on each
/// side and have gain above 1e-12 * SSE(parent).
inline std::optional<BruteSplit> brute_force_split(const Matrix& mat, std::size_t min_leaf) {
  const double parent = sse_of(mat.y);
  struct Cand {
    std::size_t f;
    double t;
    double g;
  };
  std::vector<Cand> cands;
  for (std::size_t f = 0; f < mat.m; ++f) {
    std::set<double> distinct;
    for (std::size_t r = 0; r < mat.n; ++r) distinct.insert(mat.at(r, f));
    std::vector<double> vals(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double t = vals[i] + (vals[i + 1] - vals[i]) / 2.0;
      std::vector<double> left;
      std::vector<double> right;
      for (std::size_t r = 0; r < mat.n; ++r) (mat.at(r, f) < t ? left : right).push_back(mat.y[r]);
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      cands.push_back({f, t, parent - sse_of(left) - sse_of(right)});
    }
  }
  if (cands.empty()) return std::nullopt;
  double best = -1e300;
  for (const auto& c : cands) best = std::max(best, c.g);
  if (!(best > 1e-12 * parent)) return std::nullopt;
  const double tol = 1e-12 * std::max(std::abs(best), parent);
  std::optional<BruteSplit> out;
  for (const auto& c : cands) {
    if (c.g < best - tol) continue;
    if (!out || c.f < out->feature || (c.f == out->feature && c.t < out->threshold)) {
      out = BruteSplit{c.f, c.t, c.g};
    }
  }
  return out;
}

/// sup over every pooled sample point of |F_a(x) - F_b(x)|, each ECDF
/// evaluated by counting.
inline double brute_force_ks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  double d = 0;
  for (double x : pooled) {
    const auto ca = std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; });
    const auto cb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; });
    d = std::max(d, std::abs(static_cast<double>(ca) / static_cast<double>(a.size()) -
                             static_cast<double>(cb) / static_cast<double>(b.size())));
  }
  return d;
}

/// Jacobi theta form of the Kolmogorov survival function,
/// Q(l) = 1 - sqrt(2 pi)/l * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 l^2)),
/// which converges fast for small l where the alternating series does not.
inline double kolmogorov_q_theta(double lambda) {
  const double pi = 3.14159265358979323846;
  double sum = 0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    sum += std::exp(-odd * odd * pi * pi / (8.0 * lambda * lambda));
  }
  return 1.0 - std::sqrt(2.0 * pi) / lambda * sum;
}

/// Minimal reader for the DOT files the library writes: node statements
/// `id [label="..."]` and edge statements `a -> b [label="..."]`.
struct DotGraph {
  std::map<std::string, std::string> labels;
  std::map<std::string, std::string> shapes;
  std::vector<std::tuple<std::string, std::string, std::string>> edges;
  bool is_digraph = false;
};

inline DotGraph parse_dot(const std::string& text) {
  DotGraph g;
  g.is_digraph = text.rfind("digraph", 0) == 0 && text.find('}') != std::string::npos;
  const std::regex edge(R"re(^\s*(\w+)\s*->\s*(\w+)\s*\[label="([^"]*)"\];\s*$)re");
  const std::regex node(R"re(^\s*(\w+)\s*\[label="((?:[^"\\]|\\.)*)"(?:,\s*shape=(\w+))?\];\s*$)re");
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    std::smatch m;
    if (std::regex_match(line, m, edge)) {
      g.edges.emplace_back(m[1], m[2], m[3]);
    } else if (std::regex_match(line, m, node) && m[1] != "node") {
      g.labels[m[1]] = m[2];
      g.shapes[m[1]] = m[3].matched ? std::string(m[3]) : "box";
    }
  }
  return g;
}

/// Rebuilds the preorder node list from a parsed DOT graph: for every node,
/// its label and its (yes, no) children. Returns false when the graph is not
/// a binary tree.
struct DotNode {
  std::string label;
  std::string yes;
  std::string no;
};

inline std::map<std::string, DotNode> dot_nodes(const DotGraph& g) {
  std::map<std::string, DotNode> out;
  for (const auto& [id, label] : g.labels) out[id].label = label;
  for (const auto& [from, to, label] : g.edges) (label == "yes" ? out[from].yes : out[from].no) = to;
  return out;
}

}  // namespace oracle
