#include "charterseg/select.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"

namespace charterseg {

void GroupCatalog::validate() const {
  std::set<std::string> seen;
  for (const auto& [group, proxies] : groups) {
    if (proxies.empty()) throw ConfigError("catalog group '" + group + "' is empty");
    for (const auto& p : proxies) {
      if (!seen.insert(p).second) throw ConfigError("proxy '" + p + "' listed in two groups");
    }
  }
}

GroupCatalog GroupCatalog::from_specs(std::span<const ProxySpec> specs) {
  GroupCatalog catalog;
  auto slot = [&](const std::string& group) -> std::vector<std::string>& {
    for (auto& [g, list] : catalog.groups) {
      if (g == group) return list;
    }
    catalog.groups.emplace_back(group, std::vector<std::string>{});
    return catalog.groups.back().second;
  };
  for (const char* letter : kCamelsGroups) {
    for (const auto& s : specs) {
      if (s.group == letter) slot(s.group).push_back(s.name);
    }
  }
  for (const auto& s : specs) {
    const bool camels = std::find_if(kCamelsGroups.begin(), kCamelsGroups.end(),
                                     [&](const char* l) { return s.group == l; }) != kCamelsGroups.end();
    if (!camels) slot(s.group).push_back(s.name);
  }
  catalog.validate();
  return catalog;
}

const GroupCatalog& default_catalog() {
  static const GroupCatalog catalog = GroupCatalog::from_specs(default_proxy_specs());
  return catalog;
}

std::vector<std::string> SelectionResult::proxies() const {
  std::vector<std::string> out;
  for (const auto& [group, proxy] : chosen) out.push_back(proxy);
  return out;
}

SelectionResult select_proxies(const ImportanceReport& importance, const GroupCatalog& catalog) {
  catalog.validate();
  SelectionResult result;
  result.importance = importance;
  for (const auto& [group, proxies] : catalog.groups) {
    const std::string* best = &proxies.front();
    if (proxies.size() > 1) {
      double best_score = importance.at(*best).pct_inc_mse;
      for (std::size_t i = 1; i < proxies.size(); ++i) {
        const double score = importance.at(proxies[i]).pct_inc_mse;
        if (score > best_score) {
          best_score = score;
          best = &proxies[i];
        }
      }
    }
    result.chosen.emplace_back(group, *best);
    result.renaming[*best] = group;
  }
  return result;
}

std::string selection_csv(const SelectionResult& selection) {
  std::string out = "group,proxy,pct_inc_mse\n";
  for (const auto& [group, proxy] : selection.chosen) {
    double score = 0;
    for (const auto& f : selection.importance.features) {
      if (f.feature == proxy) score = f.pct_inc_mse;
    }
    out += io::csv_escape(group) + "," + io::csv_escape(proxy) + "," + io::format_double(score) + "\n";
  }
  return out;
}

std::string selection_spec_fragment(const SelectionResult& selection,
                                    std::span<const ProxySpec> specs) {
  nlohmann::ordered_json fragment = nlohmann::ordered_json::array();
  for (const auto& [group, proxy] : selection.chosen) {
    const ProxySpec& spec = find_spec(specs, proxy);
    nlohmann::ordered_json j;
    j["name"] = spec.name;
    j["group"] = spec.group;
    j["raw_field"] = std::string(raw_field_name(spec.raw_field));
    j["direction"] = std::string(direction_name(spec.direction));
    j["mode"] = std::string(mode_name(spec.mode));
    if (spec.threshold) j["threshold"] = *spec.threshold;
    fragment.push_back(j);
  }
  return fragment.dump(2) + "\n";
}

}  // namespace charterseg
