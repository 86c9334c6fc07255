#include "charterseg/forest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"
#include "charterseg/parallel.hpp"
#include "charterseg/random.hpp"

namespace charterseg {

std::size_t ForestParams::resolved_mtry(std::size_t num_features) const {
  const std::size_t m = mtry.value_or(std::max<std::size_t>(num_features / 3, 1));
  if (m < 1 || m > num_features) {
    throw ConfigError("mtry = " + std::to_string(m) + " outside [1, " +
                      std::to_string(num_features) + "]");
  }
  return m;
}

std::vector<std::size_t> Forest::out_of_bag_rows(std::size_t tree) const {
  std::vector<std::size_t> rows;
  const auto& counts = in_bag_counts.at(tree);
  for (std::size_t r = 0; r < counts.size(); ++r) {
    if (counts[r] == 0) rows.push_back(r);
  }
  return rows;
}

double Forest::oob_fraction(std::size_t tree) const {
  const auto& counts = in_bag_counts.at(tree);
  const auto oob = std::count(counts.begin(), counts.end(), 0u);
  return static_cast<double>(oob) / static_cast<double>(counts.size());
}

std::uint64_t tree_seed(std::uint64_t master, std::size_t index) {
  return derive_seed(master, index);
}

Forest grow_forest(const TrainingView& data, const std::vector<std::string>& feature_names,
                   const ForestParams& params) {
  const std::size_t n = data.rows();
  const std::size_t m = data.num_features;
  if (m < 1) throw ConfigError("grow_forest: no features");
  if (params.n_trees < 1) throw ConfigError("grow_forest: n_trees must be >= 1");
  const std::size_t min_leaf = std::max<std::size_t>(params.min_leaf, 1);
  if (n < 2 * min_leaf) {
    throw EmptyModelError("grow_forest: " + std::to_string(n) + " rows is fewer than 2 * min_leaf");
  }
  const std::size_t mtry = params.resolved_mtry(m);

  Forest forest;
  forest.params = params;
  forest.feature_names = feature_names;
  forest.trees.resize(params.n_trees);
  forest.in_bag_counts.assign(params.n_trees, std::vector<std::uint32_t>(n, 0));

  parallel_for(params.n_trees, params.jobs, [&](std::size_t t) {
    Rng rng(tree_seed(params.seed, t));
    std::vector<std::size_t> rows(n);
    auto& counts = forest.in_bag_counts[t];
    if (params.identity_bootstrap) {
      std::iota(rows.begin(), rows.end(), 0);
    } else {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.index(n));
    }
    for (auto r : rows) ++counts[r];

    GrowOptions options;
    options.params.min_leaf = min_leaf;
    options.rows = rows;
    options.subsampler = FeatureSubsampler{mtry, &rng};
    forest.trees[t] = grow(data, feature_names, options);
  });
  return forest;
}

Forest grow_forest(const ScoredMatrix& matrix, const ForestParams& params) {
  return grow_forest(TrainingView::of(matrix), matrix.feature_names, params);
}

OobPrediction oob_predict(const Forest& forest, const TrainingView& data) {
  const std::size_t n = data.rows();
  if (forest.num_rows() != n) throw ConfigError("oob_predict: forest was trained on other rows");
  OobPrediction out;
  out.prediction.assign(n, 0.0);
  out.tree_count.assign(n, 0);
  out.has_prediction.assign(n, false);
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& counts = forest.in_bag_counts[t];
    for (std::size_t r = 0; r < n; ++r) {
      if (counts[r] != 0) continue;
      out.prediction[r] += forest.trees[t].predict(data.features.subspan(r * data.num_features, data.num_features));
      ++out.tree_count[r];
    }
  }
  double sse = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (out.tree_count[r] == 0) {
      out.prediction[r] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out.prediction[r] /= static_cast<double>(out.tree_count[r]);
    out.has_prediction[r] = true;
    const double e = data.response[r] - out.prediction[r];
    sse += e * e;
    ++out.rows_used;
  }
  out.oob_mse = out.rows_used ? sse / static_cast<double>(out.rows_used) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

const FeatureImportance& ImportanceReport::at(std::string_view name) const {
  for (const auto& f : features) {
    if (f.feature == name) return f;
  }
  throw ConfigError("importance table has no entry for '" + std::string(name) + "'");
}

std::vector<std::string> ImportanceReport::ranking() const {
  std::vector<const FeatureImportance*> order;
  for (const auto& f : features) order.push_back(&f);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) {
    return a->pct_inc_mse > b->pct_inc_mse;
  });
  std::vector<std::string> names;
  for (const auto* f : order) names.push_back(f->feature);
  return names;
}

ImportanceReport permutation_importance(const Forest& forest, const TrainingView& data,
                                        std::uint64_t seed, std::size_t jobs) {
  const std::size_t m = data.num_features;
  const std::size_t num_trees = forest.trees.size();
  const OobPrediction oob = oob_predict(forest, data);

  // deltas[t][f]; NaN when tree t has no out-of-bag rows.
  std::vector<std::vector<double>> deltas(num_trees, std::vector<double>(m, 0.0));

  parallel_for(num_trees, jobs, [&](std::size_t t) {
    const auto oob_rows = forest.out_of_bag_rows(t);
    if (oob_rows.empty()) {
      std::fill(deltas[t].begin(), deltas[t].end(), std::numeric_limits<double>::quiet_NaN());
      return;
    }
    const auto& tree = forest.trees[t];
    const double count = static_cast<double>(oob_rows.size());
    std::vector<double> row(m);

    double base = 0;
    for (auto r : oob_rows) {
      const double e = data.response[r] - tree.predict(data.features.subspan(r * m, m));
      base += e * e;
    }
    base /= count;

    std::vector<double> permuted(oob_rows.size());
    for (std::size_t f = 0; f < m; ++f) {
      for (std::size_t i = 0; i < oob_rows.size(); ++i) permuted[i] = data.at(oob_rows[i], f);
      Rng rng(derive_seed(seed, t * m + f));
      rng.shuffle(std::span<double>(permuted));
      double mse = 0;
      for (std::size_t i = 0; i < oob_rows.size(); ++i) {
        const auto r = oob_rows[i];
        std::copy_n(data.features.begin() + static_cast<std::ptrdiff_t>(r * m), m, row.begin());
        row[f] = permuted[i];
        const double e = data.response[r] - tree.predict(row);
        mse += e * e;
      }
      deltas[t][f] = mse / count - base;
    }
  });

  ImportanceReport report;
  report.oob_mse = oob.oob_mse;
  for (std::size_t f = 0; f < m; ++f) {
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < num_trees; ++t) {
      if (std::isnan(deltas[t][f])) continue;
      sum += deltas[t][f];
      ++used;
    }
    FeatureImportance fi;
    fi.feature = f < forest.feature_names.size() ? forest.feature_names[f] : "x" + std::to_string(f);
    if (used > 0) {
      fi.raw_delta = sum / static_cast<double>(used);
      double ss = 0;
      for (std::size_t t = 0; t < num_trees; ++t) {
        if (std::isnan(deltas[t][f])) continue;
        ss += (deltas[t][f] - fi.raw_delta) * (deltas[t][f] - fi.raw_delta);
      }
      fi.std_error = used > 1 ? std::sqrt(ss / static_cast<double>(used - 1) / static_cast<double>(used)) : 0.0;
    }
    fi.pct_inc_mse = report.oob_mse > 0.0 ? 100.0 * fi.raw_delta / report.oob_mse : 0.0;
    report.features.push_back(fi);
  }
  return report;
}

std::string importance_csv(const ImportanceReport& report) {
  std::string out = "feature,pct_inc_mse,raw_delta,std_error\n";
  for (const auto& f : report.features) {
    out += io::csv_escape(f.feature) + "," + io::format_double(f.pct_inc_mse) + "," +
           io::format_double(f.raw_delta) + "," + io::format_double(f.std_error) + "\n";
  }
  return out;
}

ImportanceReport parse_importance_csv(std::string_view text) {
  const auto table = io::parse_csv(text);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (table.header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto c_feature = column("feature");
  const auto c_pct = column("pct_inc_mse");
  if (!c_feature || !c_pct) throw SchemaError("importance csv needs feature and pct_inc_mse columns");
  const auto c_raw = column("raw_delta");
  const auto c_se = column("std_error");

  auto number = [](const io::CsvRecord& rec, std::size_t c) {
    if (c >= rec.fields.size()) throw ParseError("importance csv line " + std::to_string(rec.line) + ": missing cell");
    double v = 0;
    const auto& s = rec.fields[c];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw ParseError("importance csv line " + std::to_string(rec.line) + ": non-numeric '" + s + "'");
    }
    return v;
  };

  ImportanceReport report;
  for (const auto& rec : table.records) {
    FeatureImportance f;
    if (*c_feature >= rec.fields.size()) throw ParseError("importance csv: short row");
    f.feature = rec.fields[*c_feature];
    f.pct_inc_mse = number(rec, *c_pct);
    if (c_raw) f.raw_delta = number(rec, *c_raw);
    if (c_se) f.std_error = number(rec, *c_se);
    report.features.push_back(f);
  }
  return report;
}

}  // namespace charterseg
