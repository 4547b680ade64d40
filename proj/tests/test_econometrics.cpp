#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "regimeflow/backtest.hpp"
#include "regimeflow/econometrics.hpp"

using namespace regimeflow;
using doctest::Approx;

namespace {

struct Sample {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
};

Sample regression_sample(int n, std::uint64_t seed, bool heteroskedastic = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Sample s{Eigen::VectorXd(n), Eigen::MatrixXd(n, 3)};
  for (int i = 0; i < n; ++i) {
    s.X(i, 0) = 1.0;
    s.X(i, 1) = z(rng);
    s.X(i, 2) = 0.5 * s.X(i, 1) + z(rng);
    const double noise = heteroskedastic ? (0.2 + std::abs(s.X(i, 1))) * z(rng) : z(rng);
    s.y(i) = 0.3 + 1.5 * s.X(i, 1) - 0.7 * s.X(i, 2) + noise;
  }
  return s;
}

}  // namespace

TEST_CASE("OLS agrees with the normal equations") {
  const auto s = regression_sample(400, 1);
  const auto fit = econ::ols(s.y, s.X);
  const Eigen::MatrixXd xtx = s.X.transpose() * s.X;
  const Eigen::VectorXd b = xtx.inverse() * (s.X.transpose() * s.y);
  const Eigen::VectorXd e = s.y - s.X * b;
  const double s2 = e.squaredNorm() / (400 - 3);
  const Eigen::MatrixXd cov = s2 * xtx.inverse();
  for (int k = 0; k < 3; ++k) {
    CHECK(fit.coef(k) == Approx(b(k)).epsilon(1e-10));
    CHECK(fit.se(k) == Approx(std::sqrt(cov(k, k))).epsilon(1e-10));
  }
  const double tss = (s.y.array() - s.y.mean()).square().sum();
  CHECK(fit.r2 == Approx(1.0 - e.squaredNorm() / tss).epsilon(1e-10));
  // Residuals are orthogonal to every regressor.
  const Eigen::VectorXd xe = s.X.transpose() * fit.residuals;
  for (int k = 0; k < 3; ++k) CHECK(std::abs(xe(k)) <= 1e-8 * s.X.col(k).norm() * fit.residuals.norm());
}

TEST_CASE("HC1 and clustered covariances follow their sandwich formulas") {
  const auto s = regression_sample(300, 2, true);
  const auto fit = econ::ols(s.y, s.X, econ::Covariance::Robust);
  const Eigen::MatrixXd inv = (s.X.transpose() * s.X).inverse();
  const Eigen::VectorXd e = fit.residuals;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 300; ++i) meat += e(i) * e(i) * s.X.row(i).transpose() * s.X.row(i);
  const Eigen::MatrixXd hc1 = (300.0 / 297.0) * inv * meat * inv;
  for (int k = 0; k < 3; ++k) CHECK(fit.se(k) == Approx(std::sqrt(hc1(k, k))).epsilon(1e-10));

  // One observation per group reduces clustering to HC0 with the
  // small-sample factor G/(G-1) * (n-1)/(n-k).
  std::vector<std::int64_t> groups(300);
  for (int i = 0; i < 300; ++i) groups[i] = i;
  const auto cl = econ::ols(s.y, s.X, econ::Covariance::ClusteredByGroup, groups);
  const Eigen::MatrixXd hc0 = inv * meat * inv;
  const double factor = (300.0 / 299.0) * (299.0 / 297.0);
  for (int k = 0; k < 3; ++k) CHECK(cl.se(k) == Approx(std::sqrt(factor * hc0(k, k))).epsilon(1e-10));
}

TEST_CASE("OLS errors") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 2, 1, 2, 1, 2, 1, 2;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  CHECK(testing::error_code_of([&] { econ::ols(y, X); }) == ErrorCode::RankDeficient);
  X(0, 1) = std::nan("");
  CHECK(testing::error_code_of([&] { econ::ols(y, X); }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("streamed cross products match the batch fit") {
  const auto s = regression_sample(500, 3);
  econ::CrossProducts cp(3);
  for (int i = 0; i < 500; ++i) {
    const double row[3] = {s.X(i, 0), s.X(i, 1), s.X(i, 2)};
    cp.add(row, s.y(i));
  }
  const auto a = cp.solve();
  const auto b = econ::ols(s.y, s.X);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.coef(k) == Approx(b.coef(k)).epsilon(1e-9));
    CHECK(a.se(k) == Approx(b.se(k)).epsilon(1e-9));
  }
  CHECK(a.r2 == Approx(b.r2).epsilon(1e-9));
}

TEST_CASE("shock indicators") {
  SUBCASE("hand cases") {
    const std::vector<double> r{0.0, 0.03, -0.03, 0.0, 0.0};
    const std::vector<double> sigma(5, 0.01);
    const auto s = econ::shock_indicators(r, sigma, 2.0);
    CHECK(s.positive == std::vector<std::uint8_t>{0, 0, 1, 0, 0});
    CHECK(s.negative == std::vector<std::uint8_t>{0, 0, 0, 1, 0});
    CHECK(s.magnitude[2] == Approx(0.03));
    CHECK(s.magnitude[1] == 0.0);
  }
  SUBCASE("Gaussian tail frequency") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.0, 0.01);
    std::vector<double> r(10000);
    for (auto& x : r) x = z(rng);
    const std::vector<double> sigma(r.size(), 0.01);
    const auto s = econ::shock_indicators(r, sigma, 2.0);
    double count = 0;
    for (std::size_t t = 0; t < r.size(); ++t) {
      CHECK_FALSE((s.positive[t] && s.negative[t]));
      count += s.positive[t] + s.negative[t];
    }
    CHECK(std::abs(count / r.size() - 2 * 0.0227501) < 0.01);
  }
}

TEST_CASE("asymmetry fit recovers planted responses and is scale free") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  const std::size_t T = 2000, N = 20;
  std::vector<double> market(T), sigma(T, 0.01);
  for (auto& x : market) x = 0.012 * z(rng);
  const auto shocks = econ::shock_indicators(market, sigma, 2.0);
  econ::FlowPanel panel;
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<std::size_t> idx(T);
    std::vector<double> flow(T);
    double level = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      idx[t] = t;
      const double c = shocks.magnitude[t] * 100;
      level += (shocks.positive[t] ? 2e-4 * c : 0.0) + (shocks.negative[t] ? -1e-4 * c : 0.0) + 1e-4 * z(rng);
      flow[t] = level;
    }
    panel.date_index.push_back(idx);
    panel.flow.push_back(flow);
  }
  const auto row = econ::asymmetry_fit(InvestorType::Individual, panel, shocks, 100.0);
  CHECK(row.beta_plus == Approx(2e-4).epsilon(0.05));
  CHECK(row.beta_minus == Approx(-1e-4).epsilon(0.1));
  CHECK(row.ratio == Approx(row.beta_minus / row.beta_plus));
  CHECK(row.p_value < 1e-6);
  CHECK_FALSE(row.partial);

  auto scaled = panel;
  for (auto& f : scaled.flow)
    for (auto& v : f) v *= 37.0;
  const auto big = econ::asymmetry_fit(InvestorType::Individual, scaled, shocks, 100.0);
  CHECK(big.wald == Approx(row.wald).epsilon(1e-9));
  CHECK(big.t_plus == Approx(row.t_plus).epsilon(1e-9));

  econ::ShockIndicators none = shocks;
  std::fill(none.negative.begin(), none.negative.end(), 0);
  const auto partial = econ::asymmetry_fit(InvestorType::Individual, panel, none, 100.0);
  CHECK(partial.partial);
}

TEST_CASE("predictive row compares raw and filtered t-statistics") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  std::vector<econ::SignalSeries> raw(5), filt(5);
  for (std::size_t i = 0; i < 5; ++i) {
    auto& r = raw[i];
    for (int t = 0; t < 300; ++t) r.dates.push_back(Date(2022, 1, 3).plus_days(t));
    std::vector<double> theta(300);
    for (auto& th : theta) th = z(rng);
    r.signal.resize(300);
    r.returns.assign(300, 0.0);
    for (int t = 0; t < 300; ++t) r.signal[t] = theta[t] + 3.0 * z(rng);
    for (int t = 0; t + 1 < 300; ++t) r.returns[t + 1] = 0.01 * theta[t] + 0.01 * z(rng);
    filt[i] = r;
    filt[i].signal = theta;
  }
  const auto row = econ::predictive_row(InvestorType::Foreign, 1, raw, filt);
  CHECK(row.t_filtered > row.t_raw);
  CHECK(row.improvement == Approx((row.t_filtered - row.t_raw) / std::abs(row.t_raw)));
  CHECK(row.n == 5u * 299u);
  CHECK(econ::forward_return(std::vector<double>{0.0, 0.1, -0.1}, 0, 2) == Approx(1.1 * 0.9 - 1.0));
  CHECK(std::isnan(econ::forward_return(std::vector<double>{0.0, 0.1}, 0, 2)));
}

TEST_CASE("bootstrap") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.001, 0.01);
  std::vector<double> x(500);
  for (auto& v : x) v = z(rng);
  const econ::Statistic mean = [](std::span<const double> s) {
    double m = 0.0;
    for (double v : s) m += v;
    return m / static_cast<double>(s.size());
  };
  const auto a = econ::bootstrap_ci("mean", mean, x, 1000, 10, 5);
  const auto b = econ::bootstrap_ci("mean", mean, x, 1000, 10, 5);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK(a.lower < a.point);
  CHECK(a.point < a.upper);
  // Width close to the i.i.d. normal interval 2 * 1.96 * sd / sqrt(n).
  CHECK((a.upper - a.lower) == Approx(2 * 1.96 * 0.01 / std::sqrt(500.0)).epsilon(0.2));

  const std::vector<double> flat(100, 0.002);
  const econ::Statistic sharpe = [](std::span<const double> s) { return backtest::sharpe_ratio(s); };
  const auto undefined = econ::bootstrap_ci("sharpe", sharpe, flat, 100, 5, 1);
  CHECK(undefined.undefined);
  CHECK(std::isnan(undefined.lower));
}

TEST_CASE("chi-square and normal tails") {
  CHECK(econ::chi2_1_sf(3.841458820694124) == Approx(0.05).epsilon(1e-9));
  CHECK(econ::two_sided_normal_p(1.959963984540054) == Approx(0.05).epsilon(1e-9));
  CHECK(econ::chi2_1_sf(0.0) == Approx(1.0));
}
