#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "regimeflow/backtest.hpp"
#include "regimeflow/econometrics.hpp"
#include "regimeflow/ingest.hpp"
#include "regimeflow/kalman.hpp"
#include "regimeflow/regime.hpp"
#include "regimeflow/synth.hpp"
#include "regimeflow/types.hpp"

namespace regimeflow::pipeline {

// ---------------------------------------------------------------------------
// Filtering

struct SeriesFilter {
  kalman::Params params;
  bool estimated = false;   // params come from likelihood maximization
  bool degenerate = false;  // estimation found no persistent signal
  kalman::Output output;
};

struct FilterSet {
  /// stocks[i][investor]
  std::vector<std::array<SeriesFilter, kNumInvestorTypes>> stocks;
};

/// Filters every stock and investor flow. With `estimate` on, parameters are
/// fit on observations dated <= fit_end (the whole series when unset) and
/// series with fewer than 100 such observations fall back to the configured
/// values. The filter itself always runs over the full series.
FilterSet run_filters(const std::vector<FlowSeries>& stocks, const RunConfig& config,
                      std::optional<Date> fit_end = std::nullopt);

// ---------------------------------------------------------------------------
// Regimes

struct RegimeRun {
  std::vector<Date> dates;
  regime::Model model;
  regime::Path path;             // filtered; smoothed filled for full-sample fits
  std::vector<int> state;        // argmax of the filtered probabilities
  std::vector<std::uint8_t> crisis;  // filtered crisis probability > threshold
  int crisis_index = 2;

  double crisis_probability(std::size_t t) const { return path.filtered[t][static_cast<std::size_t>(crisis_index)]; }
};

/// EM on the market return series dated <= fit_end (all when unset), then the
/// Hamilton filter over the full series.
RegimeRun run_regime(const FlowSeries& market, const RunConfig& config, std::optional<Date> fit_end = std::nullopt);

/// Table-3-shaped summary per regime label.
struct RegimeSummary {
  regime::Label label;
  std::size_t days = 0;
  double mean = 0.0, volatility = 0.0, sharpe = 0.0;
  double foreign_flow = 0.0;
};
std::array<RegimeSummary, 3> summarize_regimes(const RegimeRun& run, const FlowSeries& market);

/// Flow signal of one investor per stock, raw or filtered, with returns.
std::vector<econ::SignalSeries> signal_series(const std::vector<FlowSeries>& stocks, const FilterSet* filters,
                                              InvestorType investor);

regime::RegimeRegression regime_regression(const IngestResult& data, const FilterSet& filters,
                                           const RegimeRun& regimes, InvestorType investor);

// ---------------------------------------------------------------------------
// Econometrics tables

std::vector<econ::AsymmetryRow> asymmetry_table(const IngestResult& data, const RunConfig& config);

inline constexpr std::array<int, 3> kHorizons = {1, 5, 20};
std::vector<econ::PredictiveRow> predictive_table(const IngestResult& data, const FilterSet& filters);

// ---------------------------------------------------------------------------
// Backtest

/// Causal backtest inputs. Winsorization bounds, Kalman parameters and the
/// regime model are fit on the first `train_days` market dates only; trading
/// starts on the next date.
struct BacktestRun {
  backtest::MarketInputs market;
  Eigen::MatrixXd caps;
  std::vector<std::string> stock_ids;
  std::array<Eigen::MatrixXd, kNumInvestorTypes> raw, filtered;
  std::array<std::vector<std::uint8_t>, kNumInvestorTypes> momentum_profile;
  /// weights[investor][variant] and reports[investor][variant]
  std::array<std::array<Eigen::MatrixXd, 3>, kNumInvestorTypes> weights;
  std::array<std::array<backtest::BacktestReport, 3>, kNumInvestorTypes> reports;
  Date train_end;
};

/// Causal shock-response profile: momentum_profile[t] is 1 when the
/// asymmetry regression on data through t gives 0 <= b-/b+ < 1.
std::vector<std::uint8_t> momentum_profile(const IngestResult& data, InvestorType investor, const RunConfig& config);

BacktestRun run_backtest(const ValidatedPanel& panel, const RunConfig& config);

backtest::StrategySpec strategy_spec(const RunConfig& config, InvestorType investor, Variant variant);

backtest::RobustnessReport run_robustness(const BacktestRun& run, const RunConfig& config);

// ---------------------------------------------------------------------------
// Artifact writers. Each returns the paths it wrote.

using Paths = std::vector<std::filesystem::path>;
namespace fs = std::filesystem;

Paths write_simulation(const fs::path& dir, const synth::Generated& gen);
Paths write_ingest(const fs::path& dir, const IngestResult& data);
Paths write_filters(const fs::path& dir, const IngestResult& data, const FilterSet& filters);
Paths write_regime(const fs::path& dir, const IngestResult& data, const RegimeRun& regimes,
                   const regime::RegimeRegression& regression, const RunConfig& config);
Paths write_asymmetry(const fs::path& dir, const std::vector<econ::AsymmetryRow>& rows);
Paths write_predictive(const fs::path& dir, const std::vector<econ::PredictiveRow>& rows);
Paths write_backtest(const fs::path& dir, const BacktestRun& run, const RunConfig& config);
Paths write_robustness(const fs::path& dir, const backtest::RobustnessReport& report, const RunConfig& config);

/// Markdown summary of whichever tables exist in `dir`.
std::string render_report(const fs::path& dir);

}  // namespace regimeflow::pipeline
