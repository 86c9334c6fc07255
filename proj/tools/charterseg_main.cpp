// charterseg: ingest, select, grow and study subcommands.
//
// Exit codes: 0 success, 1 analysis degraded (a subsample without a tree, or
// a model that could not be fitted), 2 configuration or I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "charterseg/config.hpp"
#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"
#include "charterseg/select.hpp"
#include "charterseg/study.hpp"

namespace cs = charterseg;

namespace {

constexpr int kOk = 0;
constexpr int kDegraded = 1;
constexpr int kConfigError = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> min_leaf;
  std::optional<std::size_t> trees;
  std::optional<std::string> rescale_scope;
  std::string subsample = "all";
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "run configuration (JSON); defaults to $CHARTERSEG_CONFIG");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--min-leaf", o.min_leaf, "minimum rows per tree leaf")->check(CLI::PositiveNumber);
  cmd->add_option("--trees", o.trees, "random forest size")->check(CLI::PositiveNumber);
  cmd->add_option("--rescale-scope", o.rescale_scope, "full or subsample")
      ->check(CLI::IsMember({"full", "subsample"}));
}

cs::RunConfig resolve_config(const Overrides& o) {
  std::string path = o.config;
  if (path.empty()) {
    if (const char* env = std::getenv(cs::kConfigEnvVar)) path = env;
  }
  if (path.empty()) {
    throw cs::ConfigError(std::string("no configuration: pass --config or set ") + cs::kConfigEnvVar);
  }
  auto cfg = cs::load_config(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.min_leaf) {
    cfg.tree.min_leaf = *o.min_leaf;
    for (auto& s : cfg.subsamples) s.min_leaf.reset();
  }
  if (o.trees) cfg.forest.n_trees = *o.trees;
  if (o.rescale_scope) cfg.rescale_scope = cs::parse_rescale_scope(*o.rescale_scope);
  cfg.validate();
  return cfg;
}

int cmd_ingest(const Overrides& o) {
  const auto cfg = resolve_config(o);
  std::vector<std::string> warnings;
  const auto loaded = cs::load_configured_panel(cfg, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  const auto raw = cs::compute_raw_proxies(loaded.panel);
  cs::io::write_text(cfg.output_dir / "tables" / "summary_stats.csv", cs::summary_stats_csv(loaded.panel));
  std::vector<cs::Exclusion> all = loaded.exclusions;
  all.insert(all.end(), raw.exclusions.begin(), raw.exclusions.end());
  cs::io::write_text(cfg.output_dir / "tables" / "exclusions.csv", cs::exclusion_log_csv(all));
  std::cout << "rows: " << loaded.panel.size() << "\n"
            << "excluded at load: " << loaded.exclusions.size() << "\n"
            << "excluded for undefined Q: " << raw.exclusions.size() << "\n"
            << "provenance: " << loaded.panel.provenance() << "\n";
  return kOk;
}

int cmd_select(const Overrides& o) {
  const auto cfg = resolve_config(o);
  const auto loaded = cs::load_configured_panel(cfg);
  const auto selection = cs::run_selection(loaded.panel, cfg);
  const auto tables = cfg.output_dir / "tables";
  cs::io::write_text(tables / "importances.csv", cs::importance_csv(selection.importance));
  cs::io::write_text(tables / "selection.csv", cs::selection_csv(selection));
  cs::io::write_text(cfg.output_dir / "selection_spec.json", cs::selection_spec_fragment(selection, cfg.proxies));
  for (const auto& [group, proxy] : selection.chosen) {
    std::cout << group << "  " << proxy << "  "
              << cs::io::format_fixed(selection.importance.at(proxy).pct_inc_mse, 1) << "\n";
  }
  return kOk;
}

int run_and_report(const cs::RunConfig& cfg) {
  const auto report = cs::run_study(cfg);
  std::cout << cs::verdict_summary(report);
  return report.degraded() ? kDegraded : kOk;
}

int cmd_grow(const Overrides& o) {
  auto cfg = resolve_config(o);
  std::optional<cs::SubsampleDef> chosen;
  for (const auto& s : cfg.subsamples) {
    if (s.name == o.subsample) chosen = s;
  }
  if (!chosen) throw cs::ConfigError("no subsample named '" + o.subsample + "'");
  cfg.subsamples = {*chosen};
  return run_and_report(cfg);
}

int cmd_study(const Overrides& o) { return run_and_report(resolve_config(o)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Charter value segmentation with regression trees"};
  app.require_subcommand(1);
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "load the panel and write summary statistics");
  auto* select = app.add_subcommand("select", "random forest proxy selection");
  auto* grow = app.add_subcommand("grow", "grow and prune one subsample tree");
  auto* study = app.add_subcommand("study", "full segmentation study");
  for (auto* cmd : {ingest, select, grow, study}) add_common(cmd, o);
  grow->add_option("--subsample", o.subsample, "subsample name from the configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*ingest) return cmd_ingest(o);
    if (*select) return cmd_select(o);
    if (*grow) return cmd_grow(o);
    return cmd_study(o);
  } catch (const cs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const cs::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
  } catch (const cs::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
  } catch (const cs::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
  } catch (const cs::UniquenessError& e) {
    std::cerr << "data error: " << e.what() << "\n";
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
  } catch (const cs::Error& e) {
    std::cerr << "analysis failed: " << e.what() << "\n";
    return kDegraded;
  }
  return kConfigError;
}
