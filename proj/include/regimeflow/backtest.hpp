#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "regimeflow/econometrics.hpp"
#include "regimeflow/types.hpp"

namespace regimeflow::backtest {

struct StrategySpec {
  Variant variant = Variant::KalmanFiltered;
  InvestorType investor = InvestorType::Foreign;
  double decile = 0.10;
  /// g(p) = max(0, 1 - p / threshold_cap).
  double threshold_cap = 0.60;
  bool stop_loss = true;
  /// +1 follows the flow, -1 fades it.
  double orientation = 1.0;
  double cost_bps = 0.0;
  double annualization = 252.0;
};

/// Dense date x stock inputs on a common calendar. NaN marks "unavailable".
struct MarketInputs {
  std::vector<Date> dates;
  Eigen::MatrixXd returns;  // r[t, i] realized over date t
  /// Formation-date gating: weights are forced to zero where false.
  std::vector<std::uint8_t> tradable;
  /// Filtered crisis probability at formation date t (NaN if unavailable).
  std::vector<double> crisis_probability;
  /// Most likely filtered regime label (0 Bull, 1 Normal, 2 Crisis) or -1.
  std::vector<int> regime_label;
  /// Market closed with a negative shock at t: r_t < -k sigma_t.
  std::vector<std::uint8_t> negative_shock_day;
};

/// Regime scaling used by the All-Weather variant.
double regime_scale(double p_crisis, double threshold_cap);

/// Daily weight matrix (T x N) formed at each date's close and held over the
/// next date. `signal` is T x N with NaN for unavailable entries.
/// `momentum_profile[t]` says whether the investor's shock response known at
/// t is momentum-type (cut after negative shocks under All-Weather).
Eigen::MatrixXd build_positions(const Eigen::MatrixXd& signal, const MarketInputs& market,
                                std::span<const std::uint8_t> momentum_profile, const StrategySpec& spec);

struct Metrics {
  double total_return = 0.0;
  double annualized_return = 0.0;
  double volatility = 0.0;  // annualized
  double sharpe = 0.0;
  double calmar = 0.0;
  double max_drawdown = 0.0;  // fraction in [0, 1]
  std::size_t n = 0;
  bool zero_variance = false;   // Sharpe undefined (NaN)
  bool calmar_infinite = false; // no drawdown
};

/// Sharpe = mean / sd * sqrt(annualization) (sample sd); max drawdown from
/// the running equity peak starting at 1; Calmar = annualized return / max DD.
/// Throws Error(InvalidArgument) for an empty series.
Metrics compute_metrics(std::span<const double> daily, double annualization = 252.0);

double sharpe_ratio(std::span<const double> daily, double annualization = 252.0);
double calmar_ratio(std::span<const double> daily, double annualization = 252.0);
std::vector<double> equity_curve(std::span<const double> daily);
std::vector<double> drawdown_curve(std::span<const double> equity);

struct BacktestReport {
  StrategySpec spec;
  std::vector<Date> dates;           // return dates
  std::vector<double> daily_returns; // net of costs
  std::vector<double> equity;
  std::vector<double> drawdown;
  std::vector<int> formation_regime; // label at formation for each return date
  Metrics metrics;
  std::array<double, 3> regime_sharpe{};  // NaN where undefined
  std::array<std::size_t, 3> regime_days{};
  double turnover = 0.0;  // mean daily sum |dw| / 2
  std::size_t first_active = 0;  // calendar index of the first return date
};

/// Applies weights to next-day returns. Metrics cover the active span only
/// (from the first formation date with any position onward).
BacktestReport run_backtest(const Eigen::MatrixXd& weights, const MarketInputs& market, const StrategySpec& spec);

/// Quintile (0 = smallest .. 4 = largest) per date and stock from the median
/// market cap over the previous calendar month; -1 when unavailable.
Eigen::MatrixXi size_quintiles(const std::vector<Date>& dates, const Eigen::MatrixXd& market_cap);

struct RobustnessRow {
  std::string category;
  std::string specification;
  double sharpe = 0.0;
  double calmar = 0.0;
  std::size_t n = 0;
};

struct RobustnessReport {
  std::vector<RobustnessRow> subperiods;
  std::vector<RobustnessRow> size_quintiles;
  econ::BootstrapResult sharpe_ci;
  econ::BootstrapResult calmar_ci;
};

struct RobustnessOptions {
  int bootstrap_iterations = 1000;
  int block_length = 10;
  std::uint64_t seed = 1;
};

/// Per-calendar-year metrics of `report`, per-size-quintile reruns of the
/// strategy, and block-bootstrap CIs for Sharpe and Calmar.
RobustnessReport run_robustness(const BacktestReport& report, const Eigen::MatrixXd& signal,
                                const MarketInputs& market, const Eigen::MatrixXd& market_cap,
                                std::span<const std::uint8_t> momentum_profile, const RobustnessOptions& options);

}  // namespace regimeflow::backtest
