#include "charterseg/config.hpp"

#include <set>

#include "json.hpp"

#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"

namespace charterseg {

using nlohmann::json;

std::string_view rescale_scope_name(RescaleScope scope) {
  return scope == RescaleScope::Full ? "full" : "subsample";
}

RescaleScope parse_rescale_scope(std::string_view text) {
  if (text == "full") return RescaleScope::Full;
  if (text == "subsample") return RescaleScope::Subsample;
  throw ConfigError("unknown rescale scope '" + std::string(text) + "'");
}

std::vector<SubsampleDef> RunConfig::default_subsamples() {
  using namespace criteria;
  return {
      {"all", All{}, std::nullopt},
      {"2005-2007", YearRange{2005, 2007}, std::nullopt},
      {"2008-2009", YearRange{2008, 2009}, std::nullopt},
      {"2010-2013", YearRange{2010, 2013}, std::nullopt},
      {"2014-2016", YearRange{2014, 2016}, std::nullopt},
      {"non-pigs", CountryGroup{CountryGroupKind::NonPigs, {}}, std::nullopt},
      {"pigs", CountryGroup{CountryGroupKind::Pigs, {}}, std::nullopt},
      {"small", SizeHalf::Small, std::nullopt},
      {"large", SizeHalf::Large, std::nullopt},
  };
}

void RunConfig::validate() const {
  if (proxies.empty()) throw ConfigError("config: no proxies");
  std::set<std::string> names;
  for (const auto& p : proxies) {
    p.validate();
    if (!names.insert(p.name).second) throw ConfigError("config: proxy '" + p.name + "' defined twice");
  }
  if (selection == SelectionMode::Fixed) {
    if (fixed_selection.empty()) throw ConfigError("config: fixed selection is empty");
    for (const auto& name : fixed_selection) find_spec(proxies, name);
  }
  if (subsamples.empty()) throw ConfigError("config: no subsamples");
  std::set<std::string> sub_names;
  for (const auto& s : subsamples) {
    if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos) {
      throw ConfigError("config: subsample names must be non-empty file-name safe strings");
    }
    if (!sub_names.insert(s.name).second) throw ConfigError("config: duplicate subsample '" + s.name + "'");
  }
  if (tree.min_leaf < 1) throw ConfigError("config: tree.min_leaf must be >= 1");
  if (folds < 2) throw ConfigError("config: tree.folds must be >= 2");
  if (forest.n_trees < 1) throw ConfigError("config: forest.n_trees must be >= 1");
  if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
  if (schema.window.start > schema.window.end) throw ConfigError("config: empty year window");
}

namespace {

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

ProxySpec parse_proxy(const json& j) {
  ProxySpec s;
  s.name = get<std::string>(j, "name", "");
  s.group = get<std::string>(j, "group", "");
  s.raw_field = parse_raw_field(get<std::string>(j, "raw_field", ""));
  s.direction = parse_direction(get<std::string>(j, "direction", ""));
  s.mode = parse_mode(get<std::string>(j, "mode", "quantile"));
  if (j.contains("threshold") && !j["threshold"].is_null()) s.threshold = get<double>(j, "threshold", 0.0);
  return s;
}

SubsampleDef parse_subsample(const json& j) {
  using namespace criteria;
  SubsampleDef def;
  def.name = get<std::string>(j, "name", "");
  def.criterion = All{};
  int kinds = 0;
  if (j.contains("years")) {
    const auto years = get<std::vector<int>>(j, "years", {});
    if (years.size() != 2 || years[0] > years[1]) {
      throw ConfigError("subsample '" + def.name + "': years must be [first, last]");
    }
    def.criterion = YearRange{years[0], years[1]};
    ++kinds;
  }
  if (j.contains("countries")) {
    const auto& c = j["countries"];
    if (c.is_string()) {
      const auto s = c.get<std::string>();
      if (s == "PIGS") def.criterion = CountryGroup{CountryGroupKind::Pigs, {}};
      else if (s == "non-PIGS") def.criterion = CountryGroup{CountryGroupKind::NonPigs, {}};
      else throw ConfigError("subsample '" + def.name + "': countries must be PIGS, non-PIGS or a list");
    } else {
      def.criterion = CountryGroup{CountryGroupKind::Explicit, get<std::vector<std::string>>(j, "countries", {})};
    }
    ++kinds;
  }
  if (j.contains("size")) {
    const auto s = get<std::string>(j, "size", "");
    if (s == "small") def.criterion = SizeHalf::Small;
    else if (s == "large") def.criterion = SizeHalf::Large;
    else throw ConfigError("subsample '" + def.name + "': size must be small or large");
    ++kinds;
  }
  if (kinds > 1) throw ConfigError("subsample '" + def.name + "': give one criterion only");
  if (j.contains("min_leaf") && !j["min_leaf"].is_null()) def.min_leaf = get<std::size_t>(j, "min_leaf", 0);
  return def;
}

}  // namespace

RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig cfg;
  if (doc.contains("data")) {
    const auto& d = doc["data"];
    if (d.contains("path")) cfg.data_path = resolve(base_dir, get<std::string>(d, "path", ""));
    if (d.contains("columns")) cfg.schema.columns = get<std::map<std::string, std::string>>(d, "columns", {});
    if (d.contains("optional_columns")) {
      cfg.schema.optional_fields = get<std::vector<std::string>>(d, "optional_columns", {});
    }
    if (d.contains("returns_path") && !d["returns_path"].is_null()) {
      cfg.returns_path = resolve(base_dir, get<std::string>(d, "returns_path", ""));
    }
    for (const auto& [field, header] : cfg.schema.columns) {
      const auto& known = ColumnSchema::canonical_fields();
      if (std::find(known.begin(), known.end(), field) == known.end()) {
        throw ConfigError("config: unknown column field '" + field + "'");
      }
    }
  }
  if (doc.contains("window")) {
    const auto w = get<std::vector<int>>(doc, "window", {});
    if (w.size() != 2) throw ConfigError("config: window must be [start, end]");
    cfg.schema.window = {w[0], w[1]};
  }
  if (doc.contains("proxies")) {
    cfg.proxies.clear();
    for (const auto& p : doc["proxies"]) cfg.proxies.push_back(parse_proxy(p));
  }
  if (doc.contains("selection")) {
    const auto& s = doc["selection"];
    const auto mode = get<std::string>(s, "mode", "fixed");
    if (mode == "rf") cfg.selection = SelectionMode::RandomForest;
    else if (mode == "fixed") cfg.selection = SelectionMode::Fixed;
    else throw ConfigError("config: selection.mode must be rf or fixed");
    const auto forest = get<std::string>(s, "forest", "joint");
    if (forest == "joint") cfg.selection_forest = SelectionForest::Joint;
    else if (forest == "per-group") cfg.selection_forest = SelectionForest::PerGroup;
    else throw ConfigError("config: selection.forest must be joint or per-group");
    if (s.contains("fixed")) cfg.fixed_selection = get<std::vector<std::string>>(s, "fixed", {});
  }
  if (doc.contains("rescale_scope")) cfg.rescale_scope = parse_rescale_scope(get<std::string>(doc, "rescale_scope", ""));
  if (doc.contains("subsamples")) {
    cfg.subsamples.clear();
    for (const auto& s : doc["subsamples"]) cfg.subsamples.push_back(parse_subsample(s));
  }
  if (doc.contains("tree")) {
    const auto& t = doc["tree"];
    cfg.tree.min_leaf = get<std::size_t>(t, "min_leaf", cfg.tree.min_leaf);
    if (t.contains("max_depth") && !t["max_depth"].is_null()) cfg.tree.max_depth = get<std::size_t>(t, "max_depth", 0);
    cfg.folds = get<std::size_t>(t, "folds", cfg.folds);
    if (t.contains("prune_rule")) cfg.prune_rule = parse_prune_rule(get<std::string>(t, "prune_rule", ""));
    cfg.relax_min_leaf = get<bool>(t, "relax_min_leaf", cfg.relax_min_leaf);
    cfg.relaxed_min_leaf = get<std::size_t>(t, "relaxed_min_leaf", cfg.relaxed_min_leaf);
  }
  if (doc.contains("forest")) {
    const auto& f = doc["forest"];
    cfg.forest.n_trees = get<std::size_t>(f, "n_trees", cfg.forest.n_trees);
    if (f.contains("mtry") && !f["mtry"].is_null()) cfg.forest.mtry = get<std::size_t>(f, "mtry", 0);
    cfg.forest.min_leaf = get<std::size_t>(f, "min_leaf", cfg.forest.min_leaf);
  }
  if (doc.contains("verdict_scope")) {
    const auto v = get<std::string>(doc, "verdict_scope", "paths");
    if (v == "paths") cfg.verdict_scope = VerdictScope::Paths;
    else if (v == "all") cfg.verdict_scope = VerdictScope::AllNodes;
    else throw ConfigError("config: verdict_scope must be paths or all");
  }
  if (doc.contains("output")) cfg.output_dir = resolve(base_dir, get<std::string>(doc, "output", "out"));
  cfg.seed = get<std::uint64_t>(doc, "seed", cfg.seed);
  cfg.jobs = get<std::size_t>(doc, "jobs", cfg.jobs);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

}  // namespace charterseg
