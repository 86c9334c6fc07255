#include "charterseg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "charterseg/errors.hpp"
#include "charterseg/io.hpp"
#include "charterseg/random.hpp"

namespace charterseg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

double ratio(double numerator, double denominator) {
  if (!std::isfinite(numerator) || !positive(denominator)) return kNaN;
  return numerator / denominator;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_number(std::string_view text) {
  double value = 0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

// ---------------------------------------------------------------------------

Panel::Panel(std::vector<BankYear> rows, std::string provenance, YearWindow window)
    : rows_(std::move(rows)), provenance_(std::move(provenance)), window_(window) {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& row : rows_) {
    if (!seen.emplace(row.bank_id, row.year).second) {
      throw UniquenessError("duplicate (bank_id, year) pair (" + row.bank_id + ", " +
                            std::to_string(row.year) + ")");
    }
  }
}

std::string exclusion_log_csv(std::span<const Exclusion> log) {
  std::string out = "row_id,reason\n";
  for (const auto& e : log) {
    out += io::csv_escape(e.row_id) + "," + io::csv_escape(e.reason) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

const std::vector<std::string>& ColumnSchema::canonical_fields() {
  static const std::vector<std::string> fields{
      "bank_id",  "country", "year", "mve", "bvl", "nta", "equity", "total_assets",
      "loans", "deposits", "loan_loss_allowances", "loan_loss_provisions",
      "non_interest_expense", "income", "liquid_assets", "roa", "roe", "beta",
      "loan_growth", "gdp_growth"};
  return fields;
}

std::string ColumnSchema::header_for(const std::string& field) const {
  const auto it = columns.find(field);
  return it == columns.end() ? field : it->second;
}

bool ColumnSchema::is_optional(const std::string& field) const {
  return std::find(optional_fields.begin(), optional_fields.end(), field) != optional_fields.end();
}

std::string content_digest(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

LoadResult parse_panel(std::string_view csv_text, const ColumnSchema& schema,
                       std::string provenance) {
  const io::CsvTable table = io::parse_csv(csv_text);

  std::map<std::string, std::size_t> header_index;
  for (std::size_t i = 0; i < table.header.size(); ++i) header_index[trim(table.header[i])] = i;

  const auto& fields = ColumnSchema::canonical_fields();
  std::vector<std::optional<std::size_t>> column_of(fields.size());
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const std::string header = schema.header_for(fields[f]);
    const auto it = header_index.find(header);
    if (it != header_index.end()) {
      column_of[f] = it->second;
    } else if (!schema.is_optional(fields[f])) {
      throw SchemaError("missing required column '" + header + "' (field " + fields[f] + ")");
    }
  }

  LoadResult result;
  std::vector<BankYear> rows;
  rows.reserve(table.records.size());

  for (const auto& record : table.records) {
    BankYear row;
    row.source_line = record.line;
    std::string blank_field;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const std::string& name = fields[f];
      std::string cell;
      if (column_of[f] && *column_of[f] < record.fields.size()) {
        cell = trim(record.fields[*column_of[f]]);
      }
      if (name == "bank_id") {
        row.bank_id = cell;
        if (cell.empty()) blank_field = name;
        continue;
      }
      if (name == "country") {
        row.country = cell;
        if (cell.empty()) blank_field = name;
        continue;
      }
      double value = kNaN;
      if (!cell.empty()) {
        const auto parsed = parse_number(cell);
        if (!parsed) {
          throw ParseError("line " + std::to_string(record.line) + ", column '" +
                           schema.header_for(name) + "': non-numeric value '" + cell + "'");
        }
        value = *parsed;
      } else if (!schema.is_optional(name) && blank_field.empty()) {
        blank_field = name;
      }
      if (name == "year") {
        if (std::isfinite(value) && value != std::floor(value)) {
          throw ParseError("line " + std::to_string(record.line) + ": year '" + cell +
                           "' is not an integer");
        }
        row.year = std::isfinite(value) ? static_cast<int>(value) : 0;
      } else if (name == "mve") row.mve = value;
      else if (name == "bvl") row.bvl = value;
      else if (name == "nta") row.nta = value;
      else if (name == "equity") row.equity = value;
      else if (name == "total_assets") row.total_assets = value;
      else if (name == "loans") row.loans = value;
      else if (name == "deposits") row.deposits = value;
      else if (name == "loan_loss_allowances") row.loan_loss_allowances = value;
      else if (name == "loan_loss_provisions") row.loan_loss_provisions = value;
      else if (name == "non_interest_expense") row.non_interest_expense = value;
      else if (name == "income") row.income = value;
      else if (name == "liquid_assets") row.liquid_assets = value;
      else if (name == "roa") row.roa = value;
      else if (name == "roe") row.roe = value;
      else if (name == "beta") row.beta = value;
      else if (name == "loan_growth") row.loan_growth = value;
      else if (name == "gdp_growth") row.gdp_growth = value;
    }

    const std::string id = row.bank_id.empty() ? "line " + std::to_string(record.line) : row.key();
    if (!blank_field.empty()) {
      result.exclusions.push_back({id, "blank " + blank_field});
      continue;
    }
    if (!schema.window.contains(row.year)) {
      result.exclusions.push_back({id, "year outside window"});
      continue;
    }
    rows.push_back(std::move(row));
  }

  result.panel = Panel(std::move(rows), std::move(provenance), schema.window);
  return result;
}

std::string panel_csv(const Panel& panel) {
  std::string out;
  const auto& fields = ColumnSchema::canonical_fields();
  for (std::size_t f = 0; f < fields.size(); ++f) out += (f ? "," : "") + fields[f];
  out += "\n";
  auto cell = [](double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); };
  for (const auto& r : panel.rows()) {
    const double values[] = {r.mve, r.bvl, r.nta, r.equity, r.total_assets, r.loans, r.deposits,
                             r.loan_loss_allowances, r.loan_loss_provisions, r.non_interest_expense,
                             r.income, r.liquid_assets, r.roa, r.roe, r.beta, r.loan_growth, r.gdp_growth};
    out += io::csv_escape(r.bank_id) + "," + io::csv_escape(r.country) + "," + std::to_string(r.year);
    for (double v : values) out += "," + cell(v);
    out += "\n";
  }
  return out;
}

LoadResult load_panel(const std::filesystem::path& path, const ColumnSchema& schema) {
  const std::string text = io::read_text(path);
  return parse_panel(text, schema, path.filename().string() + "#" + content_digest(text));
}

// ---------------------------------------------------------------------------
// Ratios

double tobin_q(double mve, double bvl, double nta) {
  if (!(nta > 0.0)) throw DomainError("tobin_q: nta must be positive");
  return (mve + bvl) / nta;
}

std::string_view raw_field_name(RawField field) {
  switch (field) {
    case RawField::CapitalRatio: return "capital_ratio";
    case RawField::AllowancesToLoans: return "allowances_to_loans";
    case RawField::ProvisionsToLoans: return "provisions_to_loans";
    case RawField::GrowthGap: return "growth_gap";
    case RawField::CostIncome: return "cost_income";
    case RawField::ExpenseToAssets: return "expense_to_assets";
    case RawField::Roa: return "roa";
    case RawField::Roe: return "roe";
    case RawField::LoansToDeposits: return "loans_to_deposits";
    case RawField::LiquidToAssets: return "liquid_to_assets";
    case RawField::Beta: return "beta";
  }
  return "?";
}

const std::array<RawField, kRawFieldCount>& all_raw_fields() {
  static const std::array<RawField, kRawFieldCount> fields{
      RawField::CapitalRatio, RawField::AllowancesToLoans, RawField::ProvisionsToLoans,
      RawField::GrowthGap,    RawField::CostIncome,        RawField::ExpenseToAssets,
      RawField::Roa,          RawField::Roe,               RawField::LoansToDeposits,
      RawField::LiquidToAssets, RawField::Beta};
  return fields;
}

RawField parse_raw_field(std::string_view name) {
  for (RawField f : all_raw_fields()) {
    if (raw_field_name(f) == name) return f;
  }
  throw ConfigError("unknown raw field '" + std::string(name) + "'");
}

RawProxyRow raw_proxies_for(const BankYear& row) {
  RawProxyRow out;
  out.q = positive(row.nta) && std::isfinite(row.mve) && std::isfinite(row.bvl)
              ? tobin_q(row.mve, row.bvl, row.nta)
              : kNaN;
  out[RawField::CapitalRatio] = ratio(row.equity, row.total_assets);
  out[RawField::AllowancesToLoans] = ratio(row.loan_loss_allowances, row.loans);
  out[RawField::ProvisionsToLoans] = ratio(row.loan_loss_provisions, row.loans);
  out[RawField::GrowthGap] = row.loan_growth - row.gdp_growth;
  out[RawField::CostIncome] = ratio(row.non_interest_expense, row.income);
  out[RawField::ExpenseToAssets] = ratio(row.non_interest_expense, row.total_assets);
  out[RawField::Roa] = row.roa;
  out[RawField::Roe] = row.roe;
  out[RawField::LoansToDeposits] = ratio(row.loans, row.deposits);
  out[RawField::LiquidToAssets] = ratio(row.liquid_assets, row.total_assets);
  out[RawField::Beta] = row.beta;
  for (double& v : out.values) {
    if (!std::isfinite(v)) v = kNaN;
  }
  return out;
}

RawProxyTable compute_raw_proxies(const Panel& panel) {
  RawProxyTable table;
  table.rows.reserve(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    RawProxyRow raw = raw_proxies_for(panel.rows()[i]);
    raw.panel_index = i;
    if (!std::isfinite(raw.q) || !(raw.q > 0.0)) {
      table.exclusions.push_back({panel.rows()[i].key(), "tobin_q undefined or non-positive"});
      continue;
    }
    table.rows.push_back(raw);
  }
  return table;
}

double compute_beta(std::span<const double> bank, std::span<const double> market) {
  if (bank.size() != market.size()) throw DomainError("compute_beta: series lengths differ");
  if (bank.size() < 2) throw DomainError("compute_beta: need at least two observations");
  const double n = static_cast<double>(bank.size());
  const double mean_b = std::accumulate(bank.begin(), bank.end(), 0.0) / n;
  const double mean_m = std::accumulate(market.begin(), market.end(), 0.0) / n;
  double sxy = 0;
  double sxx = 0;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double dm = market[i] - mean_m;
    sxy += dm * (bank[i] - mean_b);
    sxx += dm * dm;
  }
  if (!(sxx > 0.0)) throw DegenerateError("compute_beta: market returns have zero variance");
  return sxy / sxx;
}

std::map<std::string, ReturnSeries> load_returns(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv(path);
  auto column = [&](std::string_view name) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (trim(table.header[i]) == name) return i;
    }
    throw SchemaError("returns file: missing column '" + std::string(name) + "'");
  };
  const std::size_t c_bank = column("bank_id");
  const std::size_t c_year = column("year");
  const std::size_t c_ret = column("bank_return");
  const std::size_t c_mkt = column("market_return");

  std::map<std::string, ReturnSeries> out;
  for (const auto& record : table.records) {
    auto cell = [&](std::size_t c) -> std::string {
      return c < record.fields.size() ? trim(record.fields[c]) : std::string{};
    };
    const auto year = parse_number(cell(c_year));
    const auto r = parse_number(cell(c_ret));
    const auto m = parse_number(cell(c_mkt));
    if (!year || !r || !m) {
      throw ParseError("returns file line " + std::to_string(record.line) + ": non-numeric value");
    }
    auto& series = out[cell(c_bank) + ":" + std::to_string(static_cast<int>(*year))];
    series.bank.push_back(*r);
    series.market.push_back(*m);
  }
  return out;
}

Panel attach_betas(const Panel& panel, const std::map<std::string, ReturnSeries>& returns,
                   std::vector<std::string>* warnings) {
  std::vector<BankYear> rows = panel.rows();
  for (auto& row : rows) {
    const auto it = returns.find(row.key());
    if (it == returns.end()) continue;
    if (std::isfinite(row.beta)) {
      if (warnings) warnings->push_back(row.key() + ": beta column and return series both present; column kept");
      continue;
    }
    row.beta = compute_beta(it->second.bank, it->second.market);
  }
  return Panel(std::move(rows), panel.provenance(), panel.window());
}

// ---------------------------------------------------------------------------
// Subsamples

const std::vector<std::string>& pigs_countries() {
  static const std::vector<std::string> codes{"GR", "IE", "PT", "ES"};
  return codes;
}

bool is_pigs(std::string_view country) {
  const auto& codes = pigs_countries();
  return std::find(codes.begin(), codes.end(), country) != codes.end();
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of empty input");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

Panel filter_subsample(const Panel& panel, const SubsampleCriterion& criterion) {
  std::vector<BankYear> kept;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, criteria::All>) {
          kept = panel.rows();
        } else if constexpr (std::is_same_v<T, criteria::YearRange>) {
          for (const auto& row : panel.rows()) {
            if (row.year >= c.first && row.year <= c.last) kept.push_back(row);
          }
        } else if constexpr (std::is_same_v<T, criteria::CountryGroup>) {
          for (const auto& row : panel.rows()) {
            bool member = false;
            switch (c.kind) {
              case criteria::CountryGroupKind::Pigs: member = is_pigs(row.country); break;
              case criteria::CountryGroupKind::NonPigs: member = !is_pigs(row.country); break;
              case criteria::CountryGroupKind::Explicit:
                member = std::find(c.countries.begin(), c.countries.end(), row.country) !=
                         c.countries.end();
                break;
            }
            if (member) kept.push_back(row);
          }
        } else if constexpr (std::is_same_v<T, criteria::SizeHalf>) {
          if (panel.empty()) return;
          std::vector<double> assets;
          assets.reserve(panel.size());
          for (const auto& row : panel.rows()) assets.push_back(row.total_assets);
          const double cut = median(assets);
          for (const auto& row : panel.rows()) {
            const bool small = row.total_assets < cut;
            if (small == (c == criteria::SizeHalf::Small)) kept.push_back(row);
          }
        }
      },
      criterion);
  if (kept.empty()) throw EmptySubsampleError("subsample filter matched no rows");
  return Panel(std::move(kept), panel.provenance(), panel.window());
}

// ---------------------------------------------------------------------------

SummaryStats summary_stats(std::span<const double> values) {
  if (values.empty()) throw DomainError("summary_stats: empty input");
  SummaryStats s;
  s.n = values.size();
  const double n = static_cast<double>(s.n);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  if (s.n > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / (n - 1.0));
    s.std_dev_defined = true;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic panels

void PlantedTree::validate() const {
  if (nodes.empty()) throw ConfigError("planted tree has no nodes");
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (node.is_leaf()) continue;
    for (int child : {node.left, node.right}) {
      if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes.size())) {
        throw ConfigError("planted tree: child index must point forward to an existing node");
      }
      if (++parents[child] > 1) throw ConfigError("planted tree: node with two parents");
    }
  }
}

int PlantedTree::route(const RawProxyRow& raw) const {
  int at = 0;
  while (!nodes[at].is_leaf()) {
    const auto& node = nodes[at];
    at = raw[node.field] < node.threshold ? node.left : node.right;
  }
  return at;
}

Panel generate_synthetic_panel(const PlantedTree& spec, const SyntheticOptions& options) {
  spec.validate();
  if (options.n < 60) throw ConfigError("synthetic panel needs n >= 60");
  if (options.countries.empty()) throw ConfigError("synthetic panel needs at least one country");

  Rng rng(options.seed);
  const int years = options.window.end - options.window.start + 1;
  if (years < 1) throw ConfigError("synthetic panel: empty year window");

  std::vector<BankYear> rows;
  rows.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    BankYear row;
    const std::size_t bank = i / static_cast<std::size_t>(years);
    char id[16];
    std::snprintf(id, sizeof(id), "B%05zu", bank);
    row.bank_id = id;
    row.year = options.window.start + static_cast<int>(i % static_cast<std::size_t>(years));
    row.country = options.countries[bank % options.countries.size()];
    row.source_line = 0;

    // nta is a power of two so that q * nta, and hence the reconstructed Q, is exact.
    const int scale_exp = 8 + static_cast<int>(rng.index(13));
    row.nta = std::ldexp(1.0, scale_exp);
    row.total_assets = row.nta * (1.0 + rng.uniform(0.0, 0.03));

    const double capital_ratio = rng.uniform(0.02, 0.14);
    row.equity = capital_ratio * row.total_assets;
    const double grid = std::ldexp(1.0, scale_exp - 20);
    row.bvl = std::round((row.total_assets - row.equity) / grid) * grid;

    row.loans = row.total_assets * rng.uniform(0.4, 0.8);
    row.deposits = row.loans / rng.uniform(0.5, 1.5);
    row.loan_loss_allowances = row.loans * rng.uniform(0.005, 0.08);
    row.loan_loss_provisions = row.loans * rng.uniform(0.001, 0.03);
    row.income = row.total_assets * rng.uniform(0.02, 0.06);
    row.non_interest_expense = row.income * rng.uniform(0.4, 1.0);
    row.liquid_assets = row.total_assets * rng.uniform(0.05, 0.3);
    row.roa = rng.uniform(-0.02, 0.02);
    row.roe = row.roa * row.total_assets / row.equity;
    row.beta = rng.uniform(0.0, 1.5);
    row.loan_growth = rng.uniform(-0.05, 0.15);
    row.gdp_growth = rng.uniform(0.0, 0.05);

    const RawProxyRow raw = raw_proxies_for(row);
    const int leaf = spec.route(raw);
    double q = spec.nodes[leaf].leaf_mean;
    const double noise = rng.normal();
    if (options.noise_sigma > 0.0) q += options.noise_sigma * noise;
    row.mve = q * row.nta - row.bvl;
    rows.push_back(std::move(row));
  }
  return Panel(std::move(rows), "synthetic#" + std::to_string(options.seed), options.window);
}

}  // namespace charterseg
