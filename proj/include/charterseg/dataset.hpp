#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace charterseg {

/// One bank-year observation. Missing numeric cells are stored as NaN.
struct BankYear {
  std::string bank_id;
  std::string country;
  int year = 0;
  double mve = 0;  ///< market value of equity
  double bvl = 0;  ///< book value of liabilities
  double nta = 0;  ///< book assets net of goodwill
  double equity = 0;
  double total_assets = 0;
  double loans = 0;
  double deposits = 0;
  double loan_loss_allowances = 0;
  double loan_loss_provisions = 0;
  double non_interest_expense = 0;
  double income = 0;
  double liquid_assets = 0;
  double roa = 0;
  double roe = 0;
  double beta = 0;  ///< NaN when neither supplied nor computed
  double loan_growth = 0;
  double gdp_growth = 0;
  std::size_t source_line = 0;  ///< 0 for rows not read from a file

  std::string key() const { return bank_id + ":" + std::to_string(year); }
};

struct YearWindow {
  int start = 2005;
  int end = 2016;

  bool contains(int year) const { return year >= start && year <= end; }
  friend bool operator==(const YearWindow&, const YearWindow&) = default;
};

/// Ordered bank-year table. (bank_id, year) keys are unique.
class Panel {
 public:
  Panel() = default;
  /// Throws UniquenessError naming the first duplicated (bank_id, year) pair.
  Panel(std::vector<BankYear> rows, std::string provenance, YearWindow window);

  const std::vector<BankYear>& rows() const { return rows_; }
  const std::string& provenance() const { return provenance_; }
  const YearWindow& window() const { return window_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

 private:
  std::vector<BankYear> rows_;
  std::string provenance_;
  YearWindow window_;
};

/// A row (or one proxy of a row) dropped from the analysis, with the reason.
struct Exclusion {
  std::string row_id;
  std::string reason;
};

std::string exclusion_log_csv(std::span<const Exclusion> log);

// ---------------------------------------------------------------------------
// Ingestion

/// Maps canonical field names (e.g. "total_assets") to CSV header names.
/// Fields missing from `columns` are looked up under their canonical name.
struct ColumnSchema {
  std::map<std::string, std::string> columns;
  /// Canonical fields that may be absent from the file or blank in a row.
  /// Everything else is required, and a blank required cell excludes the row.
  std::vector<std::string> optional_fields{"beta"};
  YearWindow window;

  static const std::vector<std::string>& canonical_fields();
  std::string header_for(const std::string& field) const;
  bool is_optional(const std::string& field) const;
};

struct LoadResult {
  Panel panel;
  std::vector<Exclusion> exclusions;
};

/// Reads a bank-year CSV. Missing required column -> SchemaError; non-numeric
/// cell -> ParseError with line and column; duplicate key -> UniquenessError.
/// Rows with blank required cells or a year outside the window are excluded
/// and logged.
LoadResult load_panel(const std::filesystem::path& path, const ColumnSchema& schema);
LoadResult parse_panel(std::string_view csv_text, const ColumnSchema& schema,
                       std::string provenance = "inline");

/// Writes a panel back out with canonical headers; missing values are blank.
/// Numbers use the shortest round-tripping form, so parse_panel reproduces it.
std::string panel_csv(const Panel& panel);

/// Hex FNV-1a digest used as panel provenance.
std::string content_digest(std::string_view bytes);

// ---------------------------------------------------------------------------
// Ratios

/// Tobin's Q = (mve + bvl) / nta. Throws DomainError if nta <= 0.
double tobin_q(double mve, double bvl, double nta);

enum class RawField : std::uint8_t {
  CapitalRatio,
  AllowancesToLoans,
  ProvisionsToLoans,
  GrowthGap,
  CostIncome,
  ExpenseToAssets,
  Roa,
  Roe,
  LoansToDeposits,
  LiquidToAssets,
  Beta,
};

inline constexpr std::size_t kRawFieldCount = 11;

std::string_view raw_field_name(RawField field);
/// Throws ConfigError for unknown names.
RawField parse_raw_field(std::string_view name);
const std::array<RawField, kRawFieldCount>& all_raw_fields();

/// Every raw proxy of one bank-year. A proxy whose denominator is zero,
/// negative or missing is NaN.
struct RawProxyRow {
  std::size_t panel_index = 0;
  double q = 0;
  std::array<double, kRawFieldCount> values{};

  double operator[](RawField f) const { return values[static_cast<std::size_t>(f)]; }
  double& operator[](RawField f) { return values[static_cast<std::size_t>(f)]; }
};

struct RawProxyTable {
  std::vector<RawProxyRow> rows;
  /// Rows dropped entirely because Q is undefined.
  std::vector<Exclusion> exclusions;
};

/// Ratios for a single observation. q is NaN when nta <= 0 or inputs are missing.
RawProxyRow raw_proxies_for(const BankYear& row);
RawProxyTable compute_raw_proxies(const Panel& panel);

/// OLS slope of bank returns on market returns. Throws DomainError on length
/// mismatch or fewer than two points, DegenerateError on zero market variance.
double compute_beta(std::span<const double> bank_log_returns,
                    std::span<const double> market_log_returns);

/// Daily return series for one bank-year, keyed by BankYear::key().
struct ReturnSeries {
  std::vector<double> bank;
  std::vector<double> market;
};

/// Reads a long-format CSV with columns bank_id, year, bank_return, market_return.
std::map<std::string, ReturnSeries> load_returns(const std::filesystem::path& path);

/// Fills beta from return series where the panel has none. A supplied beta
/// column wins; each conflict is reported in `warnings`.
Panel attach_betas(const Panel& panel, const std::map<std::string, ReturnSeries>& returns,
                   std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Subsamples

namespace criteria {
struct YearRange {
  int first = 0;
  int last = 0;
};
enum class CountryGroupKind { Pigs, NonPigs, Explicit };
struct CountryGroup {
  CountryGroupKind kind = CountryGroupKind::Pigs;
  std::vector<std::string> countries;  ///< used for Explicit
};
enum class SizeHalf { Small, Large };
struct All {};
}  // namespace criteria

using SubsampleCriterion = std::variant<criteria::All, criteria::YearRange,
                                        criteria::CountryGroup, criteria::SizeHalf>;

/// ISO-2 codes of Greece, Ireland, Portugal and Spain.
const std::vector<std::string>& pigs_countries();
bool is_pigs(std::string_view country);

/// Subset of `panel` matching the criterion. The size split compares total
/// assets with the panel median: strictly below is small, ties go to large.
/// Throws EmptySubsampleError when nothing matches.
Panel filter_subsample(const Panel& panel, const SubsampleCriterion& criterion);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Descriptive statistics

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0;
  double std_dev = 0;  ///< sample (n - 1) standard deviation; 0 when n == 1
  double min = 0;
  double max = 0;
  bool std_dev_defined = false;
};

/// Throws DomainError on empty input.
SummaryStats summary_stats(std::span<const double> values);

// ---------------------------------------------------------------------------
// Synthetic panels

/// Node of a planted regression tree over raw proxies. A node with left < 0 is
/// a leaf. Routing: raw value < threshold goes left.
struct PlantedNode {
  RawField field = RawField::CapitalRatio;
  double threshold = 0;
  int left = -1;
  int right = -1;
  double leaf_mean = 1.0;

  bool is_leaf() const { return left < 0; }
};

struct PlantedTree {
  std::vector<PlantedNode> nodes;  ///< nodes[0] is the root

  /// Throws ConfigError on dangling child indices or cycles.
  void validate() const;
  /// Leaf index reached by `raw`.
  int route(const RawProxyRow& raw) const;
};

struct SyntheticOptions {
  std::size_t n = 500;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  YearWindow window;
  std::vector<std::string> countries{"AT", "BE", "FI", "FR", "DE", "IE",
                                     "IT", "NL", "PT", "ES", "GR"};
};

/// Panel whose Tobin's Q equals the planted leaf mean of each row plus
/// N(0, noise_sigma^2) noise. Raw proxies are drawn uniformly over plausible
/// ranges and the balance sheet is built around them. With zero noise the
/// computed Q reproduces the leaf mean exactly. Requires n >= 60.
Panel generate_synthetic_panel(const PlantedTree& spec, const SyntheticOptions& options);

}  // namespace charterseg
