#include "regimeflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "regimeflow/econometrics.hpp"
#include "regimeflow/ingest.hpp"
#include "regimeflow/parallel.hpp"
#include "regimeflow/regime.hpp"

namespace regimeflow::synth {

namespace {

// Stream tags keep each random purpose independent of the others.
enum Stream : std::uint32_t { kRegime = 1, kMarket = 2, kCaps = 3, kStockPath = 4, kStockFlow = 5, kEq5 = 6 };

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream, std::uint32_t index = 0) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, index};
  return std::mt19937_64(ss);
}

int draw_state(const double* probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (int j = 0; j < 2; ++j) {
    acc += probs[j];
    if (x < acc) return j;
  }
  return 2;
}

}  // namespace

Eigen::Matrix3d SynthSpec::default_transition() {
  // Stationary distribution ~ (0.430, 0.489, 0.081).
  Eigen::Matrix3d P;
  P << 0.900, 0.100, 0.000,
       0.088, 0.892, 0.020,
       0.000, 0.120, 0.880;
  return P;
}

void SynthSpec::check() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "synth: " + what); };
  for (int i = 0; i < 3; ++i) {
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-12) fail("transition rows must sum to 1");
    for (int j = 0; j < 3; ++j) {
      if (transition(i, j) < 0.0) fail("transition probabilities must be >= 0");
    }
    if (!(regime_sd[i] > 0.0)) fail("regime sd must be > 0");
  }
  if (!(phi >= 0.0 && phi < 1.0)) fail("phi must lie in [0,1)");
  if (!(state_noise >= 0.0)) fail("Q must be >= 0");
  if (!(measurement_noise >= 0.0)) fail("R0 must be >= 0");
  if (!(gamma >= 0.0)) fail("gamma must be >= 0");
  if (!(idiosyncratic_ratio >= 0.0)) fail("idiosyncratic_ratio must be >= 0");
  if (n_stocks < 1 || n_days < 2) fail("need at least one stock and two days");
  if (!(cap_min > 0.0 && cap_max >= cap_min)) fail("cap range must be positive and ordered");
  if (!(base_turnover > 0.0)) fail("base_turnover must be > 0");
  if (!(shock_multiple > 0.0 && return_scale > 0.0)) fail("shock multiple and return scale must be > 0");
  if (!(shock_persistence >= 0.0 && shock_persistence < 1.0)) fail("shock persistence must lie in [0,1)");
}

double SynthSpec::signal_scale() const {
  const double v = state_noise / (1.0 - phi * phi);
  return v > 0.0 ? std::sqrt(v) : 1.0;
}

std::string stock_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%05d", i);
  return buf;
}

std::vector<Date> business_days(Date start, int n) {
  std::vector<Date> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  Date d = start;
  while (static_cast<int>(out.size()) < n) {
    if (!d.is_weekend()) out.push_back(d);
    d = d.plus_days(1);
  }
  return out;
}

std::vector<int> generate_regime_path(const Eigen::Matrix3d& P, int T, std::mt19937_64& rng,
                                      std::optional<int> start) {
  std::vector<int> path(static_cast<std::size_t>(std::max(T, 0)));
  if (T <= 0) return path;
  if (start) {
    path[0] = *start;
  } else {
    const auto pi = regime::stationary_distribution(P);
    path[0] = draw_state(pi.data(), rng);
  }
  for (std::size_t t = 1; t < path.size(); ++t) {
    const double row[3] = {P(path[t - 1], 0), P(path[t - 1], 1), P(path[t - 1], 2)};
    path[t] = draw_state(row, rng);
  }
  return path;
}

MarketSeries generate_market_returns(const SynthSpec& spec, int T, std::uint64_t seed) {
  spec.check();
  auto rng = make_rng(seed, kEq5);
  MarketSeries out;
  out.regime = generate_regime_path(spec.transition, T, rng);
  std::normal_distribution<double> z(0.0, 1.0);
  out.returns.resize(out.regime.size());
  for (std::size_t t = 0; t < out.returns.size(); ++t) {
    const int s = out.regime[t];
    out.returns[t] = spec.regime_mean[s] + spec.regime_sd[s] * z(rng);
  }
  return out;
}

Generated generate_panel(const SynthSpec& spec) {
  spec.check();
  const auto T = static_cast<std::size_t>(spec.n_days);
  const auto N = static_cast<std::size_t>(spec.n_stocks);

  Generated gen;
  Truth& truth = gen.truth;
  truth.spec = spec;
  truth.dates = business_days(spec.start_date, spec.n_days);

  auto regime_rng = make_rng(spec.seed, kRegime);
  truth.regime = generate_regime_path(spec.transition, spec.n_days, regime_rng);

  auto market_rng = make_rng(spec.seed, kMarket);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  truth.market_factor.resize(T);
  for (auto& m : truth.market_factor) m = std_normal(market_rng);

  auto cap_rng = make_rng(spec.seed, kCaps);
  std::uniform_real_distribution<double> log_cap(std::log(spec.cap_min), std::log(spec.cap_max));
  truth.initial_cap.resize(N);
  for (auto& c : truth.initial_cap) c = std::exp(log_cap(cap_rng));
  {
    std::vector<double> sorted = truth.initial_cap;
    std::sort(sorted.begin(), sorted.end());
    const double median = quantile_sorted(sorted, 0.5);
    truth.size_multiplier.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      truth.size_multiplier[i] = std::pow(truth.initial_cap[i] / median, -spec.size_elasticity);
    }
  }
  truth.stock_ids.resize(N);
  for (std::size_t i = 0; i < N; ++i) truth.stock_ids[i] = stock_name(static_cast<int>(i));

  const double scale = spec.signal_scale();
  const double stationary_sd = std::sqrt(spec.state_noise / (1.0 - spec.phi * spec.phi));
  const auto sig = index(spec.signal_investor);

  // Pass 1: latent signals, returns, caps, own volatility.
  truth.theta.resize(N);
  std::vector<std::vector<double>> returns(N), caps(N), sigma(N), sigma_bar(N);
  parallel_for(N, [&](std::size_t i) {
    auto rng = make_rng(spec.seed, kStockPath, static_cast<std::uint32_t>(i));
    std::normal_distribution<double> z(0.0, 1.0);
    const double q_sd = std::sqrt(spec.state_noise);
    for (auto j : kInvestorTypes) {
      auto& th = truth.theta[i][index(j)];
      th.resize(T);
      th[0] = stationary_sd * z(rng);
      for (std::size_t t = 1; t < T; ++t) th[t] = spec.phi * th[t - 1] + q_sd * z(rng);
    }
    auto& r = returns[i];
    r.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const int s = truth.regime[t];
      double v = spec.regime_mean[s] +
                 spec.regime_sd[s] * (truth.market_factor[t] + spec.idiosyncratic_ratio * z(rng));
      if (t > 0) {
        v += spec.regime_beta[truth.regime[t - 1]] * truth.size_multiplier[i] * truth.theta[i][sig][t - 1] / scale;
      }
      r[t] = std::max(v, -0.95);
    }
    auto& c = caps[i];
    c.resize(T);
    c[0] = truth.initial_cap[i];
    for (std::size_t t = 1; t < T; ++t) c[t] = c[t - 1] * (1.0 + r[t - 1]);
    sigma[i] = realized_vol(r, spec.ewma_decay, spec.vol_seed_window);
    sigma_bar[i] = vol_baseline(sigma[i], BaselineMode::Expanding);
  });

  // Market aggregate and shocks.
  truth.market_return.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double cap = 0.0, cap_ret = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      cap += caps[i][t];
      cap_ret += caps[i][t] * returns[i][t];
    }
    truth.market_return[t] = cap_ret / cap;
  }
  const auto market_sigma = realized_vol(truth.market_return, spec.ewma_decay, spec.vol_seed_window);
  const auto shocks = econ::shock_indicators(truth.market_return, market_sigma, spec.shock_multiple);
  truth.positive_shock = shocks.positive;
  truth.negative_shock = shocks.negative;

  // Pass 2: observed flows and trade values.
  std::vector<std::vector<PanelObservation>> per_stock(N);
  parallel_for(N, [&](std::size_t i) {
    auto rng = make_rng(spec.seed, kStockFlow, static_cast<std::uint32_t>(i));
    std::normal_distribution<double> z(0.0, 1.0);
    auto& rows = per_stock[i];
    rows.resize(T);
    std::array<double, kNumInvestorTypes> response{};  // persistent shock component c_t
    for (std::size_t t = 0; t < T; ++t) {
      double ratio = 1.0;
      if (sigma_bar[i][t] > 0.0) {
        ratio = sigma[i][t] > 0.0 ? sigma[i][t] / sigma_bar[i][t] : 0.0;
      }
      double r_t = spec.measurement_noise;
      if (spec.gamma > 0.0) r_t = ratio > 0.0 ? spec.measurement_noise * std::pow(ratio, spec.gamma)
                                              : spec.measurement_noise * 1e-6;
      const double eps_sd = std::sqrt(r_t);
      auto& row = rows[t];
      row.date = truth.dates[t];
      row.stock_id = truth.stock_ids[i];
      row.market_cap = caps[i][t];
      row.close_return = returns[i][t];
      const double mag = shocks.magnitude[t] * spec.return_scale;
      for (auto j : kInvestorTypes) {
        const auto k = index(j);
        response[k] *= spec.shock_persistence;
        if (shocks.positive[t]) response[k] += spec.beta_plus[k] * mag;
        if (shocks.negative[t]) response[k] += spec.beta_minus[k] * mag;
        const double flow = spec.flow_mean[k] + truth.theta[i][k][t] + response[k] + eps_sd * z(rng);
        const double base = spec.base_turnover * row.market_cap;
        row.buy_value[k] = base + std::max(flow, 0.0) * row.market_cap;
        row.sell_value[k] = base + std::max(-flow, 0.0) * row.market_cap;
      }
    }
  });

  gen.rows.reserve(N * T);
  for (auto& rows : per_stock) {
    for (auto& r : rows) gen.rows.push_back(std::move(r));
  }
  return gen;
}

Generated regenerate(const Truth& truth) { return generate_panel(truth.spec); }

}  // namespace regimeflow::synth
