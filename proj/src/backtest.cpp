#include "regimeflow/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "regimeflow/ingest.hpp"

namespace regimeflow::backtest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x, double mean) {
  if (x.size() < 2) return 0.0;
  // A constant series has zero spread; rounding in the mean must not hide it.
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) return 0.0;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

void check_market(const MarketInputs& m) {
  const auto T = m.dates.size();
  if (static_cast<std::size_t>(m.returns.rows()) != T || m.tradable.size() != T ||
      m.crisis_probability.size() != T || m.regime_label.size() != T || m.negative_shock_day.size() != T) {
    throw Error(ErrorCode::LengthMismatch, "backtest: market inputs must share the calendar length");
  }
}

}  // namespace

double regime_scale(double p_crisis, double threshold_cap) {
  if (!std::isfinite(p_crisis)) return 0.0;
  return std::max(0.0, 1.0 - p_crisis / threshold_cap);
}

Eigen::MatrixXd build_positions(const Eigen::MatrixXd& signal, const MarketInputs& market,
                                std::span<const std::uint8_t> momentum_profile, const StrategySpec& spec) {
  check_market(market);
  const auto T = static_cast<Eigen::Index>(market.dates.size());
  const auto N = market.returns.cols();
  if (signal.rows() != T || signal.cols() != N) {
    throw Error(ErrorCode::LengthMismatch, "backtest: signal matrix does not match the return matrix");
  }
  if (!(spec.decile > 0.0 && spec.decile <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "backtest: decile must lie in (0, 0.5]");
  }
  if (!(spec.threshold_cap > 0.0)) throw Error(ErrorCode::InvalidArgument, "backtest: threshold_cap must be > 0");
  const bool all_weather = spec.variant == Variant::AllWeather;
  if (all_weather && !momentum_profile.empty() && momentum_profile.size() != static_cast<std::size_t>(T)) {
    throw Error(ErrorCode::LengthMismatch, "backtest: momentum profile length mismatch");
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(T, N);
  std::vector<std::pair<double, Eigen::Index>> ranked;
  ranked.reserve(static_cast<std::size_t>(N));
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto tu = static_cast<std::size_t>(t);
    if (!market.tradable[tu]) continue;
    double scale = 1.0;
    if (all_weather) {
      scale = regime_scale(market.crisis_probability[tu], spec.threshold_cap);
      const bool momentum = !momentum_profile.empty() && momentum_profile[tu];
      if (spec.stop_loss && momentum && market.negative_shock_day[tu]) scale = 0.0;
      if (scale <= 0.0) continue;
    }
    ranked.clear();
    for (Eigen::Index i = 0; i < N; ++i) {
      const double s = signal(t, i);
      if (std::isfinite(s)) ranked.emplace_back(spec.orientation * s, i);
    }
    if (ranked.size() < 2) continue;
    std::sort(ranked.begin(), ranked.end());
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(spec.decile * ranked.size())));
    const double short_max = ranked[n - 1].first;
    const double long_min = ranked[ranked.size() - n].first;
    // Ties straddling the cut leave the legs ambiguous; stay flat.
    if (!(long_min > short_max)) continue;
    const double leg = scale / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      w(t, ranked[k].second) = -leg;
      w(t, ranked[ranked.size() - 1 - k].second) = leg;
    }
  }
  return w;
}

std::vector<double> equity_curve(std::span<const double> daily) {
  std::vector<double> eq(daily.size());
  double e = 1.0;
  for (std::size_t t = 0; t < daily.size(); ++t) {
    e *= 1.0 + daily[t];
    eq[t] = e;
  }
  return eq;
}

std::vector<double> drawdown_curve(std::span<const double> equity) {
  std::vector<double> dd(equity.size());
  double peak = 1.0;
  for (std::size_t t = 0; t < equity.size(); ++t) {
    peak = std::max(peak, equity[t]);
    dd[t] = peak > 0.0 ? 1.0 - equity[t] / peak : 0.0;
  }
  return dd;
}

Metrics compute_metrics(std::span<const double> daily, double annualization) {
  if (daily.empty()) throw Error(ErrorCode::InvalidArgument, "metrics: empty return series");
  for (double v : daily) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "metrics: non-finite daily return");
  }
  Metrics m;
  m.n = daily.size();
  const auto eq = equity_curve(daily);
  const auto dd = drawdown_curve(eq);
  m.total_return = eq.back() - 1.0;
  m.annualized_return =
      eq.back() > 0.0 ? std::pow(eq.back(), annualization / static_cast<double>(m.n)) - 1.0 : -1.0;
  m.max_drawdown = *std::max_element(dd.begin(), dd.end());

  const double mu = mean_of(daily);
  const double sd = sample_sd(daily, mu);
  m.volatility = sd * std::sqrt(annualization);
  if (sd > 0.0) {
    m.sharpe = mu / sd * std::sqrt(annualization);
  } else {
    m.zero_variance = true;
    m.sharpe = kNaN;
  }
  if (m.max_drawdown > 0.0) {
    m.calmar = m.annualized_return / m.max_drawdown;
  } else {
    m.calmar_infinite = true;
    m.calmar = std::numeric_limits<double>::infinity();
  }
  return m;
}

double sharpe_ratio(std::span<const double> daily, double annualization) {
  if (daily.size() < 2) return kNaN;
  const double mu = mean_of(daily);
  const double sd = sample_sd(daily, mu);
  return sd > 0.0 ? mu / sd * std::sqrt(annualization) : kNaN;
}

double calmar_ratio(std::span<const double> daily, double annualization) {
  if (daily.empty()) return kNaN;
  return compute_metrics(daily, annualization).calmar;
}

BacktestReport run_backtest(const Eigen::MatrixXd& weights, const MarketInputs& market, const StrategySpec& spec) {
  check_market(market);
  const auto T = static_cast<Eigen::Index>(market.dates.size());
  const auto N = market.returns.cols();
  if (weights.rows() != T || weights.cols() != N) {
    throw Error(ErrorCode::LengthMismatch, "backtest: weight matrix does not match the return matrix");
  }
  if (T < 2) throw Error(ErrorCode::SeriesTooShort, "backtest: need at least two dates");

  BacktestReport rep;
  rep.spec = spec;
  std::vector<double> all_returns(static_cast<std::size_t>(T - 1), 0.0);
  std::vector<double> turnover(static_cast<std::size_t>(T - 1), 0.0);
  std::optional<std::size_t> first;
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    double ret = 0.0;
    double gross = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double wi = weights(t, i);
      const double prev = t > 0 ? weights(t - 1, i) : 0.0;
      gross += std::abs(wi - prev);
      if (wi == 0.0) continue;
      const double r = market.returns(t + 1, i);
      if (std::isfinite(r)) ret += wi * r;
    }
    const auto k = static_cast<std::size_t>(t);
    turnover[k] = gross / 2.0;
    all_returns[k] = ret - gross * spec.cost_bps * 1e-4;
    if (!first && weights.row(t).cwiseAbs().sum() > 0.0) first = k;
  }

  const std::size_t begin = first.value_or(all_returns.size());
  rep.first_active = begin + 1;
  for (std::size_t k = begin; k < all_returns.size(); ++k) {
    rep.dates.push_back(market.dates[k + 1]);
    rep.daily_returns.push_back(all_returns[k]);
    rep.formation_regime.push_back(market.regime_label[k]);
  }
  rep.equity = equity_curve(rep.daily_returns);
  rep.drawdown = drawdown_curve(rep.equity);
  rep.regime_sharpe.fill(kNaN);
  if (!rep.daily_returns.empty()) {
    rep.metrics = compute_metrics(rep.daily_returns, spec.annualization);
    double tsum = 0.0;
    for (std::size_t k = first.value_or(0); k < turnover.size(); ++k) tsum += turnover[k];
    rep.turnover = tsum / static_cast<double>(rep.daily_returns.size());
    for (int s = 0; s < 3; ++s) {
      std::vector<double> sub;
      for (std::size_t k = 0; k < rep.daily_returns.size(); ++k) {
        if (rep.formation_regime[k] == s) sub.push_back(rep.daily_returns[k]);
      }
      rep.regime_days[static_cast<std::size_t>(s)] = sub.size();
      rep.regime_sharpe[static_cast<std::size_t>(s)] = sharpe_ratio(sub, spec.annualization);
    }
  } else {
    rep.metrics.sharpe = kNaN;
    rep.metrics.zero_variance = true;
    rep.metrics.calmar = kNaN;
  }
  return rep;
}

Eigen::MatrixXi size_quintiles(const std::vector<Date>& dates, const Eigen::MatrixXd& market_cap) {
  const auto T = static_cast<Eigen::Index>(dates.size());
  const auto N = market_cap.cols();
  if (market_cap.rows() != T) throw Error(ErrorCode::LengthMismatch, "size_quintiles: cap matrix rows");
  Eigen::MatrixXi q = Eigen::MatrixXi::Constant(T, N, -1);
  if (T == 0) return q;

  // Month boundaries on the calendar (dates are ascending).
  std::vector<Eigen::Index> month_start{0};
  for (Eigen::Index t = 1; t < T; ++t) {
    if (dates[t].month_index() != dates[t - 1].month_index()) month_start.push_back(t);
  }
  month_start.push_back(T);

  std::vector<double> medians(static_cast<std::size_t>(N));
  std::vector<double> buf;
  std::vector<std::pair<double, Eigen::Index>> order;
  for (std::size_t m = 1; m + 1 < month_start.size(); ++m) {
    const auto prev_begin = month_start[m - 1], prev_end = month_start[m];
    if (dates[month_start[m]].month_index() != dates[prev_begin].month_index() + 1) continue;
    order.clear();
    for (Eigen::Index i = 0; i < N; ++i) {
      buf.clear();
      for (Eigen::Index t = prev_begin; t < prev_end; ++t) {
        const double c = market_cap(t, i);
        if (std::isfinite(c)) buf.push_back(c);
      }
      if (buf.empty()) continue;
      std::sort(buf.begin(), buf.end());
      order.emplace_back(quantile_sorted(buf, 0.5), i);
    }
    if (order.size() < 5) continue;
    std::sort(order.begin(), order.end());
    const auto n = order.size();
    for (std::size_t r = 0; r < n; ++r) {
      const int bucket = static_cast<int>(r * 5 / n);
      for (Eigen::Index t = month_start[m]; t < month_start[m + 1]; ++t) q(t, order[r].second) = bucket;
    }
  }
  return q;
}

RobustnessReport run_robustness(const BacktestReport& report, const Eigen::MatrixXd& signal,
                                const MarketInputs& market, const Eigen::MatrixXd& market_cap,
                                std::span<const std::uint8_t> momentum_profile, const RobustnessOptions& options) {
  RobustnessReport out;
  const double ann = report.spec.annualization;

  // Calendar-year subperiods of the realized return series.
  std::size_t k = 0;
  while (k < report.dates.size()) {
    const int year = report.dates[k].year();
    std::size_t e = k;
    while (e < report.dates.size() && report.dates[e].year() == year) ++e;
    std::span<const double> slice(report.daily_returns.data() + k, e - k);
    RobustnessRow row{"Subperiod", std::to_string(year), kNaN, kNaN, slice.size()};
    if (!slice.empty()) {
      const auto m = compute_metrics(slice, ann);
      row.sharpe = m.sharpe;
      row.calmar = m.calmar;
    }
    out.subperiods.push_back(row);
    k = e;
  }

  // Size quintiles: rerun the same strategy inside each bucket.
  const auto quint = size_quintiles(market.dates, market_cap);
  static constexpr const char* kNames[5] = {"Q1", "Q2", "Q3", "Q4", "Q5"};
  for (int b = 0; b < 5; ++b) {
    Eigen::MatrixXd masked = signal;
    for (Eigen::Index t = 0; t < masked.rows(); ++t) {
      for (Eigen::Index i = 0; i < masked.cols(); ++i) {
        if (quint(t, i) != b) masked(t, i) = kNaN;
      }
    }
    const auto w = build_positions(masked, market, momentum_profile, report.spec);
    const auto rep = run_backtest(w, market, report.spec);
    out.size_quintiles.push_back({"Size", kNames[b], rep.metrics.sharpe, rep.metrics.calmar, rep.daily_returns.size()});
  }

  auto sharpe = [ann](std::span<const double> x) { return sharpe_ratio(x, ann); };
  auto calmar = [ann](std::span<const double> x) { return calmar_ratio(x, ann); };
  out.sharpe_ci = econ::bootstrap_ci("sharpe", sharpe, report.daily_returns, options.bootstrap_iterations,
                                     options.block_length, options.seed);
  out.calmar_ci = econ::bootstrap_ci("calmar", calmar, report.daily_returns, options.bootstrap_iterations,
                                     options.block_length, options.seed + 1);
  return out;
}

}  // namespace regimeflow::backtest
