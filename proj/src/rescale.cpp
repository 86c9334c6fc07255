#include "charterseg/rescale.hpp"

#include <algorithm>
#include <cmath>

#include "charterseg/errors.hpp"

namespace charterseg {

std::string_view direction_name(RiskDirection d) {
  return d == RiskDirection::IncreasingInRisk ? "increasing" : "decreasing";
}

RiskDirection parse_direction(std::string_view text) {
  if (text == "increasing" || text == "increasing-in-risk") return RiskDirection::IncreasingInRisk;
  if (text == "decreasing" || text == "decreasing-in-risk") return RiskDirection::DecreasingInRisk;
  throw ConfigError("unknown risk direction '" + std::string(text) + "'");
}

std::string_view mode_name(RescaleMode m) {
  return m == RescaleMode::Quantile ? "quantile" : "threshold";
}

RescaleMode parse_mode(std::string_view text) {
  if (text == "quantile" || text == "standard") return RescaleMode::Quantile;
  if (text == "threshold") return RescaleMode::Threshold;
  throw ConfigError("unknown rescale mode '" + std::string(text) + "'");
}

double sample_quantile(std::span<const double> sorted, double probability) {
  if (sorted.empty()) throw DomainError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * probability;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Decreasing-in-risk proxies are handled by fitting the increasing map on the
// negated sample, which reverses the knot order exactly.
namespace {

double oriented(double value, RiskDirection direction) {
  return direction == RiskDirection::IncreasingInRisk ? value : -value;
}

std::vector<double> oriented_sorted(std::span<const double> values, RiskDirection direction) {
  if (values.empty()) throw DomainError("rescale: empty input");
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("rescale: non-finite value");
    out.push_back(oriented(v, direction));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

RiskScale RiskScale::fit_quantile(std::span<const double> values, RiskDirection direction) {
  RiskScale scale;
  scale.mode_ = RescaleMode::Quantile;
  scale.direction_ = direction;
  const auto sorted = oriented_sorted(values, direction);
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) scale.knots_.push_back(sample_quantile(sorted, p));
  scale.constant_ = sorted.front() == sorted.back();
  return scale;
}

RiskScale RiskScale::fit_threshold(std::span<const double> values, RiskDirection direction,
                                   double cutoff) {
  if (!std::isfinite(cutoff)) throw DomainError("threshold_rescale: cutoff must be finite");
  RiskScale scale;
  scale.mode_ = RescaleMode::Threshold;
  scale.direction_ = direction;
  const auto sorted = oriented_sorted(values, direction);
  scale.cutoff_ = oriented(cutoff, direction);
  scale.knots_ = {sorted.front(), scale.cutoff_, sorted.back()};
  scale.constant_ = sorted.front() == sorted.back();
  return scale;
}

double RiskScale::quantile_score(double v) const {
  const auto& q = knots_;
  if (v < q[0]) return 1.0;
  if (v > q[4]) return 5.0;
  std::size_t i = 3;
  while (q[i] > v) --i;  // largest piece whose left knot is <= v
  const double width = q[i + 1] - q[i];
  if (width <= 0.0) return static_cast<double>(i) + 2.0;
  return std::min(static_cast<double>(i) + 1.0 + (v - q[i]) / width, static_cast<double>(i) + 2.0);
}

double RiskScale::threshold_score(double v) const {
  const double lo = knots_[0];
  const double u = cutoff_;
  const double hi = knots_[2];
  if (v <= u) {
    const double width = u - lo;
    if (width <= 0.0) return 2.0;
    return std::clamp(1.0 + (v - lo) / width, 1.0, 2.0);
  }
  const double width = hi - u;
  if (width <= 0.0) return 5.0;
  return std::clamp(2.0 + 3.0 * (v - u) / width, 2.0, 5.0);
}

double RiskScale::operator()(double value) const {
  if (constant_) return 3.0;
  const double v = oriented(value, direction_);
  return mode_ == RescaleMode::Quantile ? quantile_score(v) : threshold_score(v);
}

std::vector<double> RiskScale::apply(std::span<const double> values) const {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((*this)(v));
  return out;
}

std::vector<double> quantile_rescale(std::span<const double> values, RiskDirection direction) {
  return RiskScale::fit_quantile(values, direction).apply(values);
}

std::vector<double> threshold_rescale(std::span<const double> values, RiskDirection direction,
                                      double u) {
  return RiskScale::fit_threshold(values, direction, u).apply(values);
}

// ---------------------------------------------------------------------------

void ProxySpec::validate() const {
  if (name.empty()) throw ConfigError("proxy spec without a name");
  if (group.empty()) throw ConfigError("proxy spec '" + name + "' has no group");
  if ((mode == RescaleMode::Threshold) != threshold.has_value()) {
    throw ConfigError("proxy spec '" + name +
                      "': threshold must be given exactly when mode is threshold");
  }
  if (threshold && !std::isfinite(*threshold)) {
    throw ConfigError("proxy spec '" + name + "': threshold must be finite");
  }
}

const std::vector<ProxySpec>& default_proxy_specs() {
  using enum RiskDirection;
  using enum RescaleMode;
  static const std::vector<ProxySpec> specs{
      {"Capt", "C", RawField::CapitalRatio, DecreasingInRisk, Quantile, std::nullopt},
      {"Capt_x", "C", RawField::CapitalRatio, DecreasingInRisk, Threshold, 0.06},
      {"Asts", "A", RawField::AllowancesToLoans, IncreasingInRisk, Quantile, std::nullopt},
      {"Asts_x", "A", RawField::AllowancesToLoans, IncreasingInRisk, Threshold, 0.015},
      {"Asts'", "A", RawField::ProvisionsToLoans, IncreasingInRisk, Quantile, std::nullopt},
      {"Asts'_x", "A", RawField::ProvisionsToLoans, IncreasingInRisk, Threshold, 0.01},
      {"Mang", "M", RawField::GrowthGap, DecreasingInRisk, Quantile, std::nullopt},
      {"Mang'", "M", RawField::CostIncome, IncreasingInRisk, Quantile, std::nullopt},
      {"Mang''", "M", RawField::ExpenseToAssets, IncreasingInRisk, Quantile, std::nullopt},
      {"Mang'_x", "M", RawField::CostIncome, IncreasingInRisk, Threshold, 0.7},
      {"Ergs", "E", RawField::Roa, DecreasingInRisk, Quantile, std::nullopt},
      {"Ergs'", "E", RawField::Roe, DecreasingInRisk, Quantile, std::nullopt},
      {"Ergs_x", "E", RawField::Roa, DecreasingInRisk, Threshold, 0.01},
      {"Ergs'_x", "E", RawField::Roe, DecreasingInRisk, Threshold, 0.15},
      {"Liqt", "L", RawField::LoansToDeposits, IncreasingInRisk, Quantile, std::nullopt},
      {"Liqt_x", "L", RawField::LoansToDeposits, IncreasingInRisk, Threshold, 0.8},
      {"Liqt'", "L", RawField::LiquidToAssets, DecreasingInRisk, Quantile, std::nullopt},
      {"Syst", "S", RawField::Beta, IncreasingInRisk, Quantile, std::nullopt},
  };
  return specs;
}

const ProxySpec& find_spec(std::span<const ProxySpec> specs, std::string_view name) {
  for (const auto& s : specs) {
    if (s.name == name) return s;
  }
  throw ConfigError("unknown proxy '" + std::string(name) + "'");
}

std::vector<double> ScoredMatrix::column(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
  return out;
}

ScoredBuild build_scored_matrix(const Panel& panel, std::span<const ProxySpec> specs,
                                const BuildOptions& options) {
  if (specs.empty()) throw ConfigError("build_scored_matrix: no proxy specs");
  for (const auto& spec : specs) spec.validate();
  if (options.fitted && options.fitted->scales.size() != specs.size()) {
    throw ConfigError("build_scored_matrix: fitted scales do not match the spec list");
  }

  ScoredBuild out;
  const RawProxyTable raw = compute_raw_proxies(panel);
  out.exclusions = raw.exclusions;

  std::vector<const RawProxyRow*> kept;
  for (const auto& row : raw.rows) {
    std::string missing;
    for (const auto& spec : specs) {
      if (!std::isfinite(row[spec.raw_field])) {
        if (!missing.empty()) missing += ";";
        missing += spec.name;
      }
    }
    if (!missing.empty()) {
      out.exclusions.push_back(
          {panel.rows()[row.panel_index].key(), "undefined proxy: " + missing});
      continue;
    }
    kept.push_back(&row);
  }
  if (kept.empty()) throw EmptySubsampleError("build_scored_matrix: no usable rows");

  const std::size_t n = kept.size();
  const std::size_t m = specs.size();
  ScoredMatrix& matrix = out.matrix;
  matrix.scores.assign(n * m, 0.0);
  matrix.response.reserve(n);
  for (const auto* row : kept) {
    matrix.response.push_back(row->q);
    matrix.row_ids.push_back(row->panel_index);
    matrix.row_keys.push_back(panel.rows()[row->panel_index].key());
  }

  out.scales.specs.assign(specs.begin(), specs.end());
  for (std::size_t c = 0; c < m; ++c) {
    const ProxySpec& spec = specs[c];
    std::vector<double> column(n);
    for (std::size_t r = 0; r < n; ++r) column[r] = (*kept[r])[spec.raw_field];
    RiskScale scale = options.fitted ? options.fitted->scales[c]
                      : spec.mode == RescaleMode::Quantile
                          ? RiskScale::fit_quantile(column, spec.direction)
                          : RiskScale::fit_threshold(column, spec.direction, *spec.threshold);
    for (std::size_t r = 0; r < n; ++r) matrix.scores[r * m + c] = scale(column[r]);
    out.scales.scales.push_back(std::move(scale));
    matrix.feature_names.push_back(options.rename_to_groups ? spec.group : spec.name);
    matrix.groups.push_back(spec.group);
  }
  return out;
}

}  // namespace charterseg
