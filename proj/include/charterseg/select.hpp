#pragma once

#include <map>
#include <string>
#include <vector>

#include "charterseg/forest.hpp"
#include "charterseg/rescale.hpp"

namespace charterseg {

/// Candidate proxies per CAMELS group, in catalog order.
struct GroupCatalog {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;

  /// Throws ConfigError on an empty group or a proxy listed twice.
  void validate() const;
  /// Catalog implied by a spec list, grouped in C, A, M, E, L, S order and
  /// then by first appearance.
  static GroupCatalog from_specs(std::span<const ProxySpec> specs);
};

/// C:{Capt, Capt_x}; A:{Asts, Asts_x, Asts', Asts'_x}; M:{Mang, Mang', Mang'',
/// Mang'_x}; E:{Ergs, Ergs', Ergs_x, Ergs'_x}; L:{Liqt, Liqt_x, Liqt'}; S:{Syst}.
const GroupCatalog& default_catalog();

struct SelectionResult {
  std::vector<std::pair<std::string, std::string>> chosen;  ///< (group, proxy)
  ImportanceReport importance;
  std::map<std::string, std::string> renaming;  ///< proxy -> group letter

  std::vector<std::string> proxies() const;
};

/// Per group, the proxy with the largest %IncMSE; ties go to catalog order and
/// single-candidate groups are taken as is. Throws ConfigError when a catalog
/// proxy is missing from the importance table.
SelectionResult select_proxies(const ImportanceReport& importance, const GroupCatalog& catalog);

/// Columns: group, proxy, pct_inc_mse.
std::string selection_csv(const SelectionResult& selection);

/// Proxy-spec fragment (JSON array) for the chosen proxies, consumable as the
/// "proxies" entry of a run configuration.
std::string selection_spec_fragment(const SelectionResult& selection,
                                    std::span<const ProxySpec> specs);

}  // namespace charterseg
