#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "regimeflow/backtest.hpp"

using namespace regimeflow;
using doctest::Approx;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

backtest::MarketInputs market(int T, int N) {
  backtest::MarketInputs m;
  for (int t = 0; t < T; ++t) m.dates.push_back(Date(2023, 1, 2).plus_days(t));
  m.returns = Eigen::MatrixXd::Zero(T, N);
  m.tradable.assign(T, 1);
  m.crisis_probability.assign(T, 0.0);
  m.regime_label.assign(T, 0);
  m.negative_shock_day.assign(T, 0);
  return m;
}

}  // namespace

TEST_CASE("metrics on the four-day fixture") {
  const std::vector<double> r{0.01, -0.02, 0.03, -0.01};
  const auto m = backtest::compute_metrics(r);
  // Equity: 1.01, 0.9898, 1.019494, 1.00929906.
  const auto eq = backtest::equity_curve(r);
  CHECK(eq[1] == Approx(0.9898).epsilon(1e-14));
  CHECK(eq[3] == Approx(1.00929906).epsilon(1e-14));
  CHECK(m.max_drawdown == Approx(0.02).epsilon(1e-13));
  CHECK(m.total_return == Approx(0.00929906).epsilon(1e-12));
  // Mean 0.0025, sample variance 0.001475 / 3.
  CHECK(m.sharpe == Approx(0.0025 / std::sqrt(0.001475 / 3) * std::sqrt(252.0)).epsilon(1e-12));
  CHECK(m.calmar == Approx((std::pow(1.00929906, 63.0) - 1.0) / 0.02).epsilon(1e-12));
  const auto dd = backtest::drawdown_curve(eq);
  CHECK(dd[0] == 0.0);
  CHECK(dd[3] == Approx(1 - 1.00929906 / 1.019494).epsilon(1e-12));
}

TEST_CASE("degenerate metrics") {
  const std::vector<double> flat(10, 0.001);
  const auto m = backtest::compute_metrics(flat);
  CHECK(m.zero_variance);
  CHECK(std::isnan(m.sharpe));
  CHECK(m.calmar_infinite);
  CHECK(std::isinf(m.calmar));
  CHECK(testing::error_code_of([] { backtest::compute_metrics(std::vector<double>{}); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("regime scale") {
  CHECK(backtest::regime_scale(0.0, 0.6) == 1.0);
  CHECK(backtest::regime_scale(0.3, 0.6) == Approx(0.5));
  CHECK(backtest::regime_scale(0.9, 0.6) == 0.0);
  CHECK(backtest::regime_scale(kNaN, 0.6) == 0.0);
}

TEST_CASE("decile legs are equal weighted and dollar neutral") {
  auto m = market(2, 20);
  Eigen::MatrixXd signal(2, 20);
  for (int i = 0; i < 20; ++i) signal(0, i) = signal(1, i) = i;
  signal(0, 7) = kNaN;
  backtest::StrategySpec spec;
  const auto w = backtest::build_positions(signal, m, {}, spec);
  // 19 usable names, floor(1.9) = 1 per leg.
  CHECK(w(0, 19) == 1.0);
  CHECK(w(0, 0) == -1.0);
  CHECK(w.row(0).sum() == Approx(0.0));
  CHECK(w(0, 7) == 0.0);
  CHECK(w.row(1).cwiseAbs().sum() == Approx(2.0));

  spec.orientation = -1.0;
  const auto faded = backtest::build_positions(signal, m, {}, spec);
  CHECK(faded(1, 0) == 0.5);
  CHECK(faded(1, 19) == -0.5);
}

TEST_CASE("ties across the cut leave the book flat") {
  auto m = market(1, 10);
  const Eigen::MatrixXd signal = Eigen::MatrixXd::Constant(1, 10, 0.5);
  CHECK(backtest::build_positions(signal, m, {}, {}).cwiseAbs().sum() == 0.0);
}

TEST_CASE("All-Weather scaling and stop-loss") {
  auto m = market(3, 10);
  Eigen::MatrixXd signal(3, 10);
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 10; ++i) signal(t, i) = i;
  m.crisis_probability = {0.3, 0.0, 0.0};
  m.negative_shock_day = {0, 1, 1};
  const std::vector<std::uint8_t> profile{1, 1, 0};
  backtest::StrategySpec spec;
  spec.variant = Variant::AllWeather;
  const auto w = backtest::build_positions(signal, m, profile, spec);
  CHECK(w(0, 9) == Approx(0.5));
  CHECK(w.row(1).cwiseAbs().sum() == 0.0);  // momentum profile, shock day
  CHECK(w(2, 9) == 1.0);                    // contrarian profile untouched

  spec.stop_loss = false;
  CHECK(backtest::build_positions(signal, m, profile, spec)(1, 9) == 1.0);
  spec.variant = Variant::KalmanFiltered;
  CHECK(backtest::build_positions(signal, m, profile, spec)(0, 9) == 1.0);
}

TEST_CASE("positions earn the next day's return") {
  auto m = market(4, 2);
  m.returns << 0.0, 0.0, 0.05, -0.01, 0.02, 0.03, -0.04, 0.01;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 2);
  w(1, 0) = 1.0;
  w(1, 1) = -1.0;
  w(2, 0) = 1.0;
  w(2, 1) = -1.0;
  backtest::StrategySpec spec;
  spec.cost_bps = 10.0;
  const auto rep = backtest::run_backtest(w, m, spec);
  REQUIRE(rep.daily_returns.size() == 2);
  CHECK(rep.first_active == 2);
  CHECK(rep.dates[0] == m.dates[2]);
  // Day 2: 0.02 - 0.03, opening trade of 2 units gross at 10 bps.
  CHECK(rep.daily_returns[0] == Approx(-0.01 - 2 * 10e-4));
  CHECK(rep.daily_returns[1] == Approx(-0.04 - 0.01));
  CHECK(rep.turnover == Approx(0.5));
}

TEST_CASE("missing returns contribute nothing") {
  auto m = market(2, 2);
  m.returns << 0.0, 0.0, kNaN, 0.02;
  Eigen::MatrixXd w(2, 2);
  w << 0.5, 0.5, 0.0, 0.0;
  const auto rep = backtest::run_backtest(w, m, {});
  CHECK(rep.daily_returns[0] == Approx(0.01));
}

TEST_CASE("size quintiles use the previous month's median cap") {
  std::vector<Date> dates;
  for (Date d(2022, 1, 3); dates.size() < 45; d = d.plus_days(1))
    if (!d.is_weekend()) dates.push_back(d);
  Eigen::MatrixXd caps(45, 10);
  for (int t = 0; t < 45; ++t)
    for (int i = 0; i < 10; ++i) caps(t, i) = (i + 1) * 1e9;
  const auto q = backtest::size_quintiles(dates, caps);
  CHECK(q(0, 0) == -1);  // no prior month yet
  const Eigen::Index feb = std::find_if(dates.begin(), dates.end(), [](Date d) { return d.month() == 2; }) -
                           dates.begin();
  CHECK(q(feb, 0) == 0);
  CHECK(q(feb, 1) == 0);
  CHECK(q(feb, 9) == 4);
  CHECK(q(feb, 5) == 2);
}
