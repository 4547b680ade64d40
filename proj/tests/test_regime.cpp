#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "regimeflow/regime.hpp"
#include "regimeflow/synth.hpp"

using namespace regimeflow;
using doctest::Approx;

namespace {

regime::Model toy_model() {
  regime::Model m;
  m.mean = {0.001, 0.0, -0.002};
  m.sd = {0.005, 0.012, 0.04};
  m.transition << 0.97, 0.025, 0.005, 0.02, 0.97, 0.01, 0.02, 0.05, 0.93;
  m.initial = regime::stationary_distribution(m.transition);
  return m;
}

double pdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * M_PI));
}

}  // namespace

TEST_CASE("stationary distribution is a left unit eigenvector") {
  const auto m = toy_model();
  const auto pi = regime::stationary_distribution(m.transition);
  double total = 0.0;
  for (int j = 0; j < 3; ++j) {
    double next = 0.0;
    for (int i = 0; i < 3; ++i) next += pi[i] * m.transition(i, j);
    CHECK(next == Approx(pi[j]).epsilon(1e-12));
    total += pi[j];
  }
  CHECK(total == Approx(1.0));
}

TEST_CASE("first filtered step is Bayes rule on the initial distribution") {
  const auto m = toy_model();
  const std::vector<double> r{-0.03};
  const auto path = regime::hamilton_filter(r, m);
  double norm = 0.0;
  for (int j = 0; j < 3; ++j) norm += m.initial[j] * pdf(r[0], m.mean[j], m.sd[j]);
  for (int j = 0; j < 3; ++j) {
    CHECK(path.filtered[0][j] == Approx(m.initial[j] * pdf(r[0], m.mean[j], m.sd[j]) / norm).epsilon(1e-12));
  }
  CHECK(path.log_likelihood == Approx(std::log(norm)).epsilon(1e-12));
}

TEST_CASE("two-day smoothed marginals match direct enumeration") {
  const auto m = toy_model();
  const std::vector<double> r{0.004, -0.05};
  auto path = regime::hamilton_filter(r, m);
  path.smoothed = regime::kim_smoother(path, m);
  double joint[3][3], total = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      joint[a][b] = m.initial[a] * pdf(r[0], m.mean[a], m.sd[a]) * m.transition(a, b) * pdf(r[1], m.mean[b], m.sd[b]);
      total += joint[a][b];
    }
  for (int a = 0; a < 3; ++a) {
    const double first = (joint[a][0] + joint[a][1] + joint[a][2]) / total;
    const double second = (joint[0][a] + joint[1][a] + joint[2][a]) / total;
    CHECK(path.smoothed[0][a] == Approx(first).epsilon(1e-12));
    CHECK(path.smoothed[1][a] == Approx(second).epsilon(1e-12));
    CHECK(path.smoothed[1][a] == Approx(path.filtered[1][a]).epsilon(1e-12));
  }
}

TEST_CASE("filter errors") {
  const auto m = toy_model();
  const std::vector<double> bad{0.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK(testing::error_code_of([&] { regime::hamilton_filter(bad, m); }) == ErrorCode::NonFiniteInput);
  // Log-space recursion: an absurd outlier is unlikely, not impossible.
  const std::vector<double> far{1e6};
  const auto path = regime::hamilton_filter(far, m);
  CHECK(std::isfinite(path.log_likelihood));
  CHECK(path.log_likelihood < -1e10);
}

TEST_CASE("most likely state takes the lowest index on ties") {
  regime::Path p;
  p.filtered = {{0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  CHECK(p.most_likely() == std::vector<int>{0, 2, 0});
}

TEST_CASE("labels: crisis has the largest sd, bull the higher mean of the rest") {
  regime::Model m;
  m.mean = {-0.002, 0.0015, -0.0003};
  m.sd = {0.04, 0.005, 0.012};
  const auto map = regime::label_regimes(m);
  CHECK(map.labels[0] == regime::Label::Crisis);
  CHECK(map.labels[1] == regime::Label::Bull);
  CHECK(map.labels[2] == regime::Label::Normal);
  CHECK_FALSE(map.tie_break);

  m.transition << 0.9, 0.05, 0.05, 0.1, 0.8, 0.1, 0.2, 0.2, 0.6;
  m.initial = {0.2, 0.5, 0.3};
  m.labels = map.labels;
  const auto c = regime::canonical_order(m);
  CHECK(c.sd[0] == 0.005);
  CHECK(c.sd[2] == 0.04);
  // P(Bull -> Crisis) was P(1 -> 0) before the permutation.
  CHECK(c.transition(0, 2) == 0.1);
  CHECK(c.transition(2, 0) == 0.05);
  CHECK(c.initial[0] == 0.5);
}

TEST_CASE("EM on a planted market series") {
  synth::SynthSpec spec;
  const auto series = synth::generate_market_returns(spec, 3000, 77);
  const auto m = regime::fit_em(series.returns);
  CHECK_NOTHROW(m.check());
  CHECK(m.sd[2] == Approx(spec.regime_sd[2]).epsilon(0.15));
  CHECK(m.sd[0] < m.sd[1]);
  CHECK(m.mean[0] > m.mean[1]);
  for (std::size_t i = 1; i < m.loglik_trace.size(); ++i) {
    CHECK(m.loglik_trace[i] >= m.loglik_trace[i - 1] - 1e-9 * std::abs(m.loglik_trace[i - 1]));
  }
  CHECK(m.log_likelihood == Approx(regime::hamilton_filter(series.returns, m).log_likelihood).epsilon(1e-9));
}

TEST_CASE("separation flags near-identical regimes") {
  regime::Model m;
  m.mean = {0.001, 0.001, -0.002};
  m.sd = {0.01, 0.0101, 0.04};
  CHECK(regime::separation(m) == Approx(std::abs(std::log(0.01 / 0.0101))).epsilon(1e-12));
  CHECK(regime::separation(m) < regime::kMergeThreshold);
  m.sd[1] = 0.02;
  m.mean[1] = -0.001;
  CHECK(regime::separation(m) > regime::kMergeThreshold);
}

TEST_CASE("regime-conditional regression assigns by state") {
  // Two stocks, returns follow 2 * S in state 0 and 5 * S in state 2.
  std::vector<Date> dates;
  for (int d = 0; d < 200; ++d) dates.push_back(Date(2021, 1, 1).plus_days(d));
  std::vector<int> state(dates.size());
  for (std::size_t t = 0; t < state.size(); ++t) state[t] = (t / 20) % 2 == 0 ? 0 : 2;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<econ::SignalSeries> stocks(2);
  for (auto& s : stocks) {
    s.dates = dates;
    s.signal.resize(dates.size());
    s.returns.assign(dates.size(), 0.0);
    for (auto& x : s.signal) x = z(rng);
    for (std::size_t t = 0; t + 1 < dates.size(); ++t) {
      s.returns[t + 1] = (state[t] == 0 ? 2.0 : 5.0) * s.signal[t] + 1e-3 * z(rng);
    }
  }
  regime::Model m;
  m.mean = {0.001, 0.0, -0.001};
  m.sd = {0.01, 0.02, 0.04};
  m.transition = Eigen::Matrix3d::Constant(1.0 / 3);
  const auto reg = regime::regime_conditional_regression(stocks, dates, state, m);
  CHECK(reg.fits[0].beta == Approx(2.0).epsilon(1e-3));
  CHECK(reg.fits[2].beta == Approx(5.0).epsilon(1e-3));
  CHECK(reg.fits[1].skipped);
}
