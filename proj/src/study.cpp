#include "charterseg/study.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"
#include "charterseg/parallel.hpp"
#include "charterseg/random.hpp"

namespace charterseg {

namespace {

// Seed streams off the master seed. Subsample i uses derive_seed(master, i).
constexpr std::uint64_t kForestStream = 0x5e1ec7000001ULL;

std::string num(double v) { return std::isfinite(v) ? io::format_double(v) : ""; }
std::string fixed3(double v) { return io::format_fixed(v, 3); }

std::string group_label(Group g) { return g == Group::QMin ? "Q^Min" : "Q^Max"; }

std::vector<ProxySpec> active_specs_for(const RunConfig& config, const std::optional<SelectionResult>& selection) {
  std::vector<ProxySpec> out;
  const auto names = selection ? selection->proxies() : config.fixed_selection;
  for (const auto& name : names) out.push_back(find_spec(config.proxies, name));
  return out;
}

bool groups_unique(std::span<const ProxySpec> specs) {
  std::set<std::string> seen;
  for (const auto& s : specs) {
    if (!seen.insert(s.group).second) return false;
  }
  return true;
}

std::vector<StatRow> stat_rows(const Panel& panel) {
  const auto raw = compute_raw_proxies(panel);
  std::vector<StatRow> out;
  auto add = [&](std::string name, auto pick) {
    std::vector<double> values;
    for (const auto& r : raw.rows) {
      const double v = pick(r);
      if (std::isfinite(v)) values.push_back(v);
    }
    StatRow row{std::move(name), std::nullopt};
    if (!values.empty()) row.stats = summary_stats(values);
    out.push_back(std::move(row));
  };
  add("q", [](const RawProxyRow& r) { return r.q; });
  for (auto f : all_raw_fields()) {
    add(std::string(raw_field_name(f)), [f](const RawProxyRow& r) { return r[f]; });
  }
  return out;
}

std::string stat_cells(const StatRow& row) {
  if (!row.stats) return "0,,,,,";
  const auto& s = *row.stats;
  return std::to_string(s.n) + "," + num(s.mean) + "," + (s.std_dev_defined ? num(s.std_dev) : "") + "," +
         num(s.min) + "," + num(s.max);
}

SubsampleResult study_one(const Panel& panel, const SubsampleDef& def, std::size_t index,
                          const RunConfig& config, std::span<const ProxySpec> specs,
                          const ScaleSet* full_scales) {
  SubsampleResult res;
  res.name = def.name;
  res.min_leaf = def.min_leaf.value_or(config.tree.min_leaf);

  Panel sub;
  try {
    sub = filter_subsample(panel, def.criterion);
  } catch (const EmptySubsampleError&) {
    res.no_tree = "empty subsample";
    return res;
  }
  res.panel_rows = sub.size();
  res.summary = stat_rows(sub);

  BuildOptions opts;
  opts.rename_to_groups = groups_unique(specs);
  opts.fitted = full_scales;
  ScoredBuild built;
  try {
    built = build_scored_matrix(sub, specs, opts);
  } catch (const EmptySubsampleError&) {
    res.no_tree = "no usable rows";
    return res;
  }
  res.exclusions = built.exclusions;
  const auto& m = built.matrix;
  res.usable_rows = m.rows();

  if (res.usable_rows < 2 * res.min_leaf) {
    if (config.relax_min_leaf && res.usable_rows >= 2 * config.relaxed_min_leaf) {
      res.min_leaf = config.relaxed_min_leaf;
      res.relaxed = true;
    } else {
      res.no_tree = "n = " + std::to_string(res.usable_rows) + " is below 2 * min_leaf = " +
                    std::to_string(2 * res.min_leaf);
      return res;
    }
  }
  if (config.folds > res.usable_rows) {
    res.no_tree = "fewer rows than cross-validation folds";
    return res;
  }

  TreeParams params = config.tree;
  params.min_leaf = res.min_leaf;
  CvOptions cv;
  cv.folds = config.folds;
  cv.rule = config.prune_rule;
  cv.seed = derive_seed(config.seed, index);
  cv.jobs = 1;
  auto pruned = cv_prune(m, params, cv);
  res.tree = std::move(pruned.tree);
  res.trace = std::move(pruned.trace);
  res.extremes = extreme_leaves(res.tree);
  res.verdicts = alignment_verdicts(res.tree, res.extremes, config.verdict_scope);

  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::optional<Correlation> corr;
    try {
      const auto col = m.column(c);
      corr = pearson(col, m.response);
    } catch (const Error&) {
    }
    res.correlations.emplace_back(m.feature_names[c], corr);
  }

  if (res.extremes.min.leaf != res.extremes.max.leaf) {
    std::vector<ComparisonInput> vars;
    vars.push_back({"Q", {}, {}, std::nullopt});
    for (std::size_t c = 0; c < specs.size(); ++c) {
      vars.push_back({m.feature_names[c], {}, {}, specs[c].direction});
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const int leaf = res.tree.leaf_for(m.row(r));
      const bool in_min = leaf == res.extremes.min.leaf;
      const bool in_max = leaf == res.extremes.max.leaf;
      if (!in_min && !in_max) continue;
      const auto raw = raw_proxies_for(sub.rows()[m.row_ids[r]]);
      auto push = [&](ComparisonInput& v, double value) {
        (in_min ? v.min_group : v.max_group).push_back(value);
      };
      push(vars[0], m.response[r]);
      for (std::size_t c = 0; c < specs.size(); ++c) push(vars[c + 1], raw[specs[c].raw_field]);
    }
    res.comparison = group_comparison(vars);
  }
  return res;
}

}  // namespace

bool StudyReport::degraded() const {
  return std::any_of(subsamples.begin(), subsamples.end(), [](const auto& s) { return !s.has_tree(); });
}

LoadResult load_configured_panel(const RunConfig& config, std::vector<std::string>* warnings) {
  if (config.data_path.empty()) throw ConfigError("config: data.path is not set");
  auto loaded = load_panel(config.data_path, config.schema);
  if (config.returns_path) {
    const auto returns = load_returns(*config.returns_path);
    loaded.panel = attach_betas(loaded.panel, returns, warnings);
  }
  return loaded;
}

SelectionResult run_selection(const Panel& panel, const RunConfig& config) {
  const auto catalog = GroupCatalog::from_specs(config.proxies);
  auto fit = [&](std::span<const ProxySpec> specs, std::uint64_t stream) {
    const auto built = build_scored_matrix(panel, specs);
    ForestParams fp = config.forest;
    fp.seed = derive_seed(config.seed, stream);
    fp.jobs = config.jobs;
    if (fp.mtry && *fp.mtry > specs.size()) fp.mtry = specs.size();
    const auto forest = grow_forest(built.matrix, fp);
    return permutation_importance(forest, TrainingView::of(built.matrix), derive_seed(config.seed, stream + 1),
                                  config.jobs);
  };
  if (config.selection_forest == SelectionForest::Joint) {
    return select_proxies(fit(config.proxies, kForestStream), catalog);
  }
  // Per-group forests: each %IncMSE is relative to its own group's OOB MSE.
  ImportanceReport merged;
  std::uint64_t stream = kForestStream;
  for (const auto& [group, names] : catalog.groups) {
    std::vector<ProxySpec> specs;
    for (const auto& name : names) specs.push_back(find_spec(config.proxies, name));
    const auto part = fit(specs, stream += 2);
    merged.features.insert(merged.features.end(), part.features.begin(), part.features.end());
  }
  merged.oob_mse = std::numeric_limits<double>::quiet_NaN();
  return select_proxies(merged, catalog);
}

StudyReport run_study(const Panel& panel, const RunConfig& config) {
  config.validate();
  StudyReport report;
  report.seed = config.seed;
  report.provenance = panel.provenance();
  report.panel_rows = panel.size();

  if (config.selection == SelectionMode::RandomForest) report.selection = run_selection(panel, config);
  report.active_specs = active_specs_for(config, report.selection);

  std::optional<ScaleSet> full_scales;
  if (config.rescale_scope == RescaleScope::Full) {
    full_scales = build_scored_matrix(panel, report.active_specs).scales;
  }

  report.subsamples.resize(config.subsamples.size());
  parallel_for(config.subsamples.size(), config.jobs, [&](std::size_t i) {
    report.subsamples[i] = study_one(panel, config.subsamples[i], i, config, report.active_specs,
                                     full_scales ? &*full_scales : nullptr);
  });
  return report;
}

StudyReport run_study(const RunConfig& config) {
  std::vector<std::string> warnings;
  auto loaded = load_configured_panel(config, &warnings);
  auto report = run_study(loaded.panel, config);
  report.load_exclusions = std::move(loaded.exclusions);
  report.warnings = std::move(warnings);
  write_bundle(report, config, config.output_dir);
  return report;
}

std::string summary_stats_csv(const Panel& panel) {
  std::string out = "variable,n,mean,std_dev,min,max\n";
  for (const auto& row : stat_rows(panel)) out += row.variable + "," + stat_cells(row) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string verdict_cell(const SubsampleResult& s, const std::string& factor) {
  for (const auto& f : s.verdicts.factors) {
    if (f.factor == factor) return std::string(verdict_label(f.verdict));
  }
  return "";
}

std::vector<std::string> factor_names(const StudyReport& report) {
  for (const auto& s : report.subsamples) {
    if (s.has_tree()) return s.tree.feature_names();
  }
  std::vector<std::string> names;
  const bool unique = groups_unique(report.active_specs);
  for (const auto& spec : report.active_specs) names.push_back(unique ? spec.group : spec.name);
  return names;
}

std::string render_markdown(const StudyReport& report, const RunConfig& config) {
  std::ostringstream md;
  const auto factors = factor_names(report);
  md << "# Charter value segmentation study\n\n";
  md << "- master seed: " << report.seed << "\n";
  md << "- panel: " << report.provenance << " (" << report.panel_rows << " bank-years, "
     << report.load_exclusions.size() << " excluded at load)\n";
  md << "- window: " << config.schema.window.start << "-" << config.schema.window.end << "\n";
  md << "- rescale scope: " << rescale_scope_name(config.rescale_scope) << "\n";
  md << "- prune rule: " << prune_rule_name(config.prune_rule) << ", " << config.folds << " folds\n";
  md << "- verdict scope: " << (config.verdict_scope == VerdictScope::Paths ? "extreme-leaf paths" : "all nodes")
     << "\n";
  md << "- proxies:";
  for (const auto& s : report.active_specs) md << " " << s.name << " (" << s.group << ")";
  md << "\n\n";
  for (const auto& w : report.warnings) md << "> warning: " << w << "\n";
  if (!report.warnings.empty()) md << "\n";

  if (report.selection) {
    md << "## Proxy selection\n\n| group | proxy | %IncMSE |\n|---|---|---|\n";
    for (const auto& [group, proxy] : report.selection->chosen) {
      md << "| " << group << " | " << proxy << " | "
         << io::format_fixed(report.selection->importance.at(proxy).pct_inc_mse, 1) << " |\n";
    }
    md << "\n";
  }

  md << "## Alignment verdicts\n\n| subsample | n |";
  for (const auto& f : factors) md << " " << f << " |";
  md << "\n|---|---|";
  for (std::size_t i = 0; i < factors.size(); ++i) md << "---|";
  md << "\n";
  for (const auto& s : report.subsamples) {
    md << "| " << s.name << " | " << s.usable_rows << " |";
    if (!s.has_tree()) {
      md << " no tree |";
      for (std::size_t i = 1; i < factors.size(); ++i) md << " |";
    } else {
      for (const auto& f : factors) md << " " << verdict_cell(s, f) << " |";
    }
    md << "\n";
  }
  md << "\n";

  for (const auto& s : report.subsamples) {
    md << "## Subsample " << s.name << "\n\n";
    md << "- bank-years: " << s.panel_rows << ", usable: " << s.usable_rows << "\n";
    if (!s.has_tree()) {
      md << "- no tree: " << *s.no_tree << "\n\n";
      continue;
    }
    md << "- min_leaf: " << s.min_leaf << (s.relaxed ? " (relaxed)" : "") << "\n";
    md << "- leaves: " << s.tree.leaf_count() << ", chosen alpha: " << io::format_double(s.trace.chosen_alpha)
       << "\n";
    const auto& names = s.tree.feature_names();
    md << "- Q^Min = " << fixed3(s.extremes.min.mean) << " (n = " << s.extremes.min.n << ", "
       << io::format_fixed(100.0 * s.extremes.min.share, 2) << "%): "
       << (s.extremes.min.steps.empty() ? "root" : describe_path(s.extremes.min, names)) << "\n";
    md << "- Q^Max = " << fixed3(s.extremes.max.mean) << " (n = " << s.extremes.max.n << ", "
       << io::format_fixed(100.0 * s.extremes.max.share, 2) << "%): "
       << (s.extremes.max.steps.empty() ? "root" : describe_path(s.extremes.max, names)) << "\n\n";

    md << "| factor | r | p |\n|---|---|---|\n";
    for (const auto& [factor, corr] : s.correlations) {
      if (corr) {
        md << "| " << factor << " | " << fixed3(corr->r) << significance_stars(corr->p) << " | " << fixed3(corr->p)
           << " |\n";
      } else {
        md << "| " << factor << " | n/a | n/a |\n";
      }
    }
    md << "\n";
    if (s.comparison) {
      md << "| variable | mean Q^Min | mean Q^Max | D | p | lower risk |\n|---|---|---|---|---|---|\n";
      for (const auto& row : s.comparison->rows) {
        md << "| " << row.name << " | " << fixed3(row.mean_min) << " | " << fixed3(row.mean_max) << " | "
           << fixed3(row.d) << row.stars << " | " << fixed3(row.p) << " | "
           << (row.lower_risk ? group_label(*row.lower_risk) : "") << " |\n";
      }
      md << "\n";
    }
  }
  return md.str();
}

}  // namespace

void write_bundle(const StudyReport& report, const RunConfig& config, const std::filesystem::path& dir) {
  const auto tables = dir / "tables";
  const auto trees = dir / "trees";
  std::filesystem::create_directories(tables);
  std::filesystem::create_directories(trees);

  io::write_text(dir / "report.md", render_markdown(report, config));

  std::string subsamples =
      "subsample,panel_rows,usable_rows,min_leaf,relaxed,status,leaves,chosen_alpha,q_min,q_min_n,q_min_share,"
      "q_min_path,q_max,q_max_n,q_max_share,q_max_path\n";
  std::string verdicts = "subsample,factor,verdict,nodes\n";
  std::string correlations = "subsample,factor,r,p,n,stars\n";
  std::string comparisons = "subsample,variable,mean_q_min,mean_q_max,ks_d,p,stars,lower_risk_group\n";
  std::string stats = "subsample,variable,n,mean,std_dev,min,max\n";
  std::string traces = "subsample,alpha,leaves,cv_mean,cv_se,chosen\n";
  std::string exclusions = "subsample,row_id,reason\n";

  for (const auto& e : report.load_exclusions) {
    exclusions += "load," + io::csv_escape(e.row_id) + "," + io::csv_escape(e.reason) + "\n";
  }

  for (const auto& s : report.subsamples) {
    const auto name = io::csv_escape(s.name);
    for (const auto& row : s.summary) stats += name + "," + row.variable + "," + stat_cells(row) + "\n";
    for (const auto& e : s.exclusions) {
      exclusions += name + "," + io::csv_escape(e.row_id) + "," + io::csv_escape(e.reason) + "\n";
    }
    subsamples += name + "," + std::to_string(s.panel_rows) + "," + std::to_string(s.usable_rows) + "," +
                  std::to_string(s.min_leaf) + "," + (s.relaxed ? "1" : "0") + ",";
    if (!s.has_tree()) {
      subsamples += io::csv_escape("no tree: " + *s.no_tree) + ",,,,,,,,,,\n";
      continue;
    }
    const auto& names = s.tree.feature_names();
    subsamples += "ok," + std::to_string(s.tree.leaf_count()) + "," + num(s.trace.chosen_alpha) + "," +
                  num(s.extremes.min.mean) + "," + std::to_string(s.extremes.min.n) + "," +
                  num(s.extremes.min.share) + "," + io::csv_escape(describe_path(s.extremes.min, names, 6)) + "," +
                  num(s.extremes.max.mean) + "," + std::to_string(s.extremes.max.n) + "," +
                  num(s.extremes.max.share) + "," + io::csv_escape(describe_path(s.extremes.max, names, 6)) + "\n";

    for (const auto& f : s.verdicts.factors) {
      std::string nodes;
      for (const auto& ev : f.nodes) {
        if (!nodes.empty()) nodes += ";";
        nodes += std::to_string(ev.node) + ":" + num(ev.threshold) + ":" + num(ev.low_risk_mean) + ":" +
                 num(ev.high_risk_mean);
      }
      verdicts += name + "," + io::csv_escape(f.factor) + "," + std::string(verdict_label(f.verdict)) + "," +
                  io::csv_escape(nodes) + "\n";
    }
    for (const auto& [factor, corr] : s.correlations) {
      correlations += name + "," + io::csv_escape(factor) + ",";
      correlations += corr ? num(corr->r) + "," + num(corr->p) + "," + std::to_string(corr->n) + "," +
                                 std::string(significance_stars(corr->p))
                           : ",,,";
      correlations += "\n";
    }
    if (s.comparison) {
      for (const auto& row : s.comparison->rows) {
        comparisons += name + "," + io::csv_escape(row.name) + "," + num(row.mean_min) + "," + num(row.mean_max) +
                       "," + num(row.d) + "," + num(row.p) + "," + row.stars + "," +
                       (row.lower_risk ? group_label(*row.lower_risk) : "") + "\n";
      }
    }
    for (std::size_t a = 0; a < s.trace.alphas.size(); ++a) {
      traces += name + "," + num(s.trace.alphas[a]) + "," + std::to_string(s.trace.subtree_sizes[a]) + "," +
                num(s.trace.cv_mean[a]) + "," + num(s.trace.cv_se[a]) + "," +
                (a == s.trace.chosen_index ? "1" : "0") + "\n";
    }
    io::write_text(trees / (s.name + ".dot"), export_dot(s.tree));
    io::write_text(trees / (s.name + ".json"), export_json(s.tree));
  }

  io::write_text(tables / "summary_stats.csv", stats);
  io::write_text(tables / "subsamples.csv", subsamples);
  io::write_text(tables / "verdicts.csv", verdicts);
  io::write_text(tables / "correlations.csv", correlations);
  io::write_text(tables / "group_comparisons.csv", comparisons);
  io::write_text(tables / "prune_trace.csv", traces);
  io::write_text(tables / "exclusions.csv", exclusions);
  if (report.selection) {
    io::write_text(tables / "importances.csv", importance_csv(report.selection->importance));
    io::write_text(tables / "selection.csv", selection_csv(*report.selection));
  }
}

std::string verdict_summary(const StudyReport& report) {
  const auto factors = factor_names(report);
  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    // Column width counts code points so the en dash lines up.
    std::size_t len = 0;
    for (unsigned char c : s) len += (c & 0xC0) != 0x80;
    if (len < w) s.append(w - len, ' ');
    return s;
  };
  out << pad("subsample", 12) << pad("n", 7) << pad("leaves", 8) << pad("Q^Min", 8) << pad("Q^Max", 8);
  for (const auto& f : factors) out << pad(f, 7);
  out << "\n";
  for (const auto& s : report.subsamples) {
    out << pad(s.name, 12) << pad(std::to_string(s.usable_rows), 7);
    if (!s.has_tree()) {
      out << "no tree (" << *s.no_tree << ")\n";
      continue;
    }
    out << pad(std::to_string(s.tree.leaf_count()), 8) << pad(fixed3(s.extremes.min.mean), 8)
        << pad(fixed3(s.extremes.max.mean), 8);
    for (const auto& f : factors) out << pad(verdict_cell(s, f), 7);
    out << "\n";
  }
  return out.str();
}

}  // namespace charterseg
