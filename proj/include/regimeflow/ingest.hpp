#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regimeflow/types.hpp"

namespace regimeflow {

/// (buy - sell) / prior-day market cap for one investor type.
double normalize_flow(const PanelObservation& obs, InvestorType investor);

/// Causal EWMA volatility. sigma[t] depends only on returns[0..t-1]:
///   t = 0            : 0 (no information)
///   1 <= t < window  : expanding sample SD of returns[0..t-1] (|r0| at t = 1)
///   t = window       : sample SD of the first `window` returns (the seed)
///   t > window       : sigma2[t] = decay * sigma2[t-1] + (1 - decay) * r[t-1]^2
/// Throws Error(SeriesTooShort) for fewer than two returns.
std::vector<double> realized_vol(std::span<const double> returns, double decay, int seed_window = 20);

/// Expanding trailing mean baseline: out[0] = sigma[0], out[t] = mean(sigma[0..t-1]).
/// FullSample mode fills every entry with the arithmetic mean.
std::vector<double> vol_baseline(std::span<const double> sigma, BaselineMode mode = BaselineMode::Expanding);

/// Empirical quantile with linear interpolation between order statistics
/// (position (n-1)*q). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double q);

/// Clamp to the empirical [lower, upper] quantiles of the series itself.
/// (0, 1) is the identity.
std::vector<double> winsorize(std::span<const double> series, double lower, double upper);

/// Clamp to explicitly supplied bounds.
void clamp_in_place(std::vector<double>& series, double lo, double hi);

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_retained = 0;
  std::map<std::string, std::size_t> rows_dropped;  // reason -> rows
  std::size_t stocks_read = 0;
  std::size_t stocks_retained = 0;
  std::optional<Date> first_date;
  std::optional<Date> last_date;

  std::size_t dropped_total() const;
  bool balanced() const { return rows_read == rows_retained + dropped_total(); }
};

struct IngestOptions {
  double ewma_decay = 0.94;
  int vol_seed_window = 20;
  BaselineMode baseline_mode = BaselineMode::Expanding;
  int min_observations = 60;
  double flow_winsor_lower = 0.01;
  double flow_winsor_upper = 0.99;
  double return_winsor_lower = 0.0;
  double return_winsor_upper = 1.0;
  /// Winsorization quantiles are fit on rows dated <= this date (pooled
  /// across stocks per variable). Unset means the full sample.
  std::optional<Date> winsor_fit_end;

  static IngestOptions from(const RunConfig& cfg);
};

struct IngestResult {
  std::vector<FlowSeries> stocks;  // ordered by stock_id
  FlowSeries market;               // stock_id "MARKET"
  IngestStats stats;
};

/// Per-stock flow series plus the market aggregate (value-weighted mean
/// return by prior-day cap, equal-weighted mean flow). The aggregate's vol
/// and baseline are computed from its own return series.
/// Throws Error(EmptyAfterFilters) when no stock survives the activity filter.
IngestResult build_flow_series(const ValidatedPanel& panel, const IngestOptions& options);

}  // namespace regimeflow
