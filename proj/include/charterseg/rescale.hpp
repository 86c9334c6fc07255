#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "charterseg/dataset.hpp"

namespace charterseg {

/// Raw orientation of a proxy. Scores are always increasing in risk.
enum class RiskDirection { IncreasingInRisk, DecreasingInRisk };

enum class RescaleMode { Quantile, Threshold };

std::string_view direction_name(RiskDirection d);
RiskDirection parse_direction(std::string_view text);
std::string_view mode_name(RescaleMode m);
RescaleMode parse_mode(std::string_view text);

/// Piecewise-linear map from raw values to the [1, 5] risk scale, fitted on a
/// sample and applicable to any value (values beyond the fitted range are
/// clamped to the nearest score bound).
///
/// Quantile mode: knots min, Q1, median, Q3, max map to 1..5 (mirrored for
/// decreasing-in-risk proxies). Threshold mode: values on the safe side of the
/// cutoff share [1, 2], the rest share (2, 5].
///
/// A fully constant sample scores 3 everywhere. A zero-width piece maps to the
/// upper score bound of that piece.
class RiskScale {
 public:
  static RiskScale fit_quantile(std::span<const double> values, RiskDirection direction);
  static RiskScale fit_threshold(std::span<const double> values, RiskDirection direction,
                                 double cutoff);

  double operator()(double value) const;
  std::vector<double> apply(std::span<const double> values) const;

  RescaleMode mode() const { return mode_; }
  RiskDirection direction() const { return direction_; }
  /// Quantile knots (quantile mode) or {min, cutoff, max} (threshold mode).
  const std::vector<double>& knots() const { return knots_; }
  bool constant() const { return constant_; }

 private:
  double quantile_score(double value) const;
  double threshold_score(double value) const;

  RescaleMode mode_ = RescaleMode::Quantile;
  RiskDirection direction_ = RiskDirection::IncreasingInRisk;
  std::vector<double> knots_;
  double cutoff_ = 0;
  bool constant_ = false;
};

/// Type-7 sample quantile: linear interpolation between order statistics.
double sample_quantile(std::span<const double> sorted_values, double probability);

/// Scores for `values` on the [1, 5] scale using quartile knots.
std::vector<double> quantile_rescale(std::span<const double> values, RiskDirection direction);

/// Scores for `values` using a supervisory cutoff `u`; `u` itself scores 2.
std::vector<double> threshold_rescale(std::span<const double> values, RiskDirection direction,
                                      double u);

/// One candidate CAMELS proxy.
struct ProxySpec {
  std::string name;
  std::string group;  ///< CAMELS letter: C, A, M, E, L or S
  RawField raw_field = RawField::CapitalRatio;
  RiskDirection direction = RiskDirection::IncreasingInRisk;
  RescaleMode mode = RescaleMode::Quantile;
  std::optional<double> threshold;  ///< present iff mode == Threshold

  /// Throws ConfigError when threshold presence disagrees with the mode.
  void validate() const;
};

/// The eighteen candidate proxies with the supervisory cutoffs (6% capital,
/// 1.5% allowances, 1% provisions, 0.7 cost-income, 1% ROA, 15% ROE,
/// 0.8 loans-to-deposits).
const std::vector<ProxySpec>& default_proxy_specs();

/// Spec by name from `specs`; throws ConfigError when absent.
const ProxySpec& find_spec(std::span<const ProxySpec> specs, std::string_view name);

/// Canonical column labels after selection ("C", "A", ...).
inline constexpr std::array<const char*, 6> kCamelsGroups{"C", "A", "M", "E", "L", "S"};

/// Rescaled predictors plus Tobin's Q. `scores` is row-major n x m.
struct ScoredMatrix {
  std::vector<std::string> feature_names;
  std::vector<std::string> groups;
  std::vector<double> scores;
  std::vector<double> response;
  std::vector<std::size_t> row_ids;  ///< indices into the source Panel
  std::vector<std::string> row_keys;

  std::size_t rows() const { return response.size(); }
  std::size_t cols() const { return feature_names.size(); }
  double at(std::size_t row, std::size_t col) const { return scores[row * cols() + col]; }
  std::span<const double> row(std::size_t r) const {
    return {scores.data() + r * cols(), cols()};
  }
  std::vector<double> column(std::size_t c) const;
};

/// Fitted scales, one per spec, so that a matrix can be rebuilt for other rows.
struct ScaleSet {
  std::vector<ProxySpec> specs;
  std::vector<RiskScale> scales;
};

struct ScoredBuild {
  ScoredMatrix matrix;
  ScaleSet scales;
  /// Rows dropped because Q or an active proxy is undefined.
  std::vector<Exclusion> exclusions;
};

struct BuildOptions {
  /// When true, columns are renamed to the CAMELS letter of their group.
  bool rename_to_groups = false;
  /// Scales fitted elsewhere (full-sample scope). Must match `specs`.
  const ScaleSet* fitted = nullptr;
};

/// Rescales the active proxies of `panel`. Scales are fitted on the rows of
/// this panel unless `options.fitted` supplies them. Throws
/// EmptySubsampleError when no usable rows remain and ConfigError for an
/// empty spec list.
ScoredBuild build_scored_matrix(const Panel& panel, std::span<const ProxySpec> specs,
                                const BuildOptions& options = {});

}  // namespace charterseg
