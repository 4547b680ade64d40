#include "regimeflow/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "regimeflow/csv.hpp"
#include "regimeflow/manifest.hpp"
#include "regimeflow/parallel.hpp"

namespace regimeflow::pipeline {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinEstimationSample = 100;
// Shock days of each sign needed before the causal response profile is trusted.
constexpr std::size_t kMinProfileShocks = 5;

std::size_t count_through(const std::vector<Date>& dates, std::optional<Date> end) {
  if (!end) return dates.size();
  return static_cast<std::size_t>(std::upper_bound(dates.begin(), dates.end(), *end) - dates.begin());
}

std::map<Date, std::size_t> calendar_index(const std::vector<Date>& dates) {
  std::map<Date, std::size_t> pos;
  for (std::size_t i = 0; i < dates.size(); ++i) pos.emplace(dates[i], i);
  return pos;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string percent(double v, int digits = 3) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v * 100.0 << "%";
  return o.str();
}

std::string fixed(double v, int digits = 3) {
  if (!std::isfinite(v)) return std::isinf(v) ? (v > 0 ? "inf" : "-inf") : "n/a";
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

std::string horizon_name(int h) { return "R_t+" + std::to_string(h); }

std::string variant_title(Variant v) {
  switch (v) {
    case Variant::StaticRaw: return "Static Raw";
    case Variant::KalmanFiltered: return "Kalman Filtered";
    case Variant::AllWeather: return "All Weather";
  }
  return "?";
}

/// Writes via a temporary sibling so a crash never leaves half a file.
template <typename Fn>
void write_csv_atomic(const fs::path& path, std::initializer_list<std::string_view> header, Fn&& fill) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".partial";
  {
    CsvWriter w(tmp, header);
    fill(w);
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& doc) { manifest::write_atomic(path, doc.dump(2) + "\n"); }

json metrics_json(const backtest::Metrics& m) {
  return json{{"total_return", number(m.total_return)},
              {"annualized_return", number(m.annualized_return)},
              {"volatility", number(m.volatility)},
              {"sharpe", number(m.sharpe)},
              {"calmar", number(m.calmar)},
              {"max_drawdown", number(m.max_drawdown)},
              {"days", m.n},
              {"zero_variance", m.zero_variance},
              {"calmar_infinite", m.calmar_infinite}};
}

json bootstrap_json(const econ::BootstrapResult& b) {
  return json{{"statistic", b.statistic},   {"point", number(b.point)},
              {"lower", number(b.lower)},   {"upper", number(b.upper)},
              {"iterations", b.iterations}, {"block_length", b.block_length},
              {"undefined", b.undefined},   {"point_outside", b.point_outside}};
}

json robustness_row_json(const backtest::RobustnessRow& r) {
  return json{{"category", r.category},
              {"specification", r.specification},
              {"sharpe", number(r.sharpe)},
              {"calmar", number(r.calmar)},
              {"n", r.n}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Filtering

FilterSet run_filters(const std::vector<FlowSeries>& stocks, const RunConfig& config, std::optional<Date> fit_end) {
  FilterSet out;
  out.stocks.resize(stocks.size());
  const kalman::Params defaults{config.kalman.phi, config.kalman.state_noise, config.kalman.measurement_noise,
                                config.kalman.gamma};
  parallel_for(stocks.size() * kNumInvestorTypes, [&](std::size_t k) {
    const auto i = k / kNumInvestorTypes;
    const auto j = k % kNumInvestorTypes;
    const auto& s = stocks[i];
    const std::span<const double> flow(s.flow[j]);
    const std::span<const double> sigma(s.realized_vol);
    const std::span<const double> sigma_bar(s.vol_baseline);
    SeriesFilter f;
    f.params = defaults;
    if (config.kalman.estimate) {
      const auto n_fit = count_through(s.dates, fit_end);
      if (n_fit >= kMinEstimationSample) {
        try {
          const auto est = kalman::estimate_params(flow.first(n_fit), sigma.first(n_fit), sigma_bar.first(n_fit),
                                                   config.kalman.gamma);
          f.params = est.params;
          f.estimated = true;
          f.degenerate = est.degenerate;
        } catch (const Error&) {
          f.params = defaults;  // keep configured values for unusable series
        }
      }
    }
    f.output = kalman::filter_series(flow, sigma, sigma_bar, f.params);
    out.stocks[i][j] = std::move(f);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Regimes

RegimeRun run_regime(const FlowSeries& market, const RunConfig& config, std::optional<Date> fit_end) {
  const auto n_fit = count_through(market.dates, fit_end);
  if (n_fit < 30) throw Error(ErrorCode::SeriesTooShort, "regime: fewer than 30 market days in the fit window");
  regime::EmOptions options;
  options.max_iterations = config.regime.max_iterations;
  options.tolerance = config.regime.tolerance;
  RegimeRun run;
  run.dates = market.dates;
  run.model = regime::fit_em(std::span<const double>(market.returns).first(n_fit), options);
  run.path = regime::hamilton_filter(market.returns, run.model);
  if (!fit_end) run.path.smoothed = regime::kim_smoother(run.path, run.model);
  run.state = run.path.most_likely(false);
  run.crisis_index = run.model.index_of(regime::Label::Crisis);
  run.crisis = run.path.crisis_flags(run.model, config.regime.crisis_threshold);
  return run;
}

std::array<RegimeSummary, 3> summarize_regimes(const RegimeRun& run, const FlowSeries& market) {
  std::array<RegimeSummary, 3> out;
  for (int l = 0; l < 3; ++l) {
    auto& s = out[static_cast<std::size_t>(l)];
    s.label = static_cast<regime::Label>(l);
    std::vector<double> r;
    double flow = 0.0;
    for (std::size_t t = 0; t < run.state.size(); ++t) {
      if (static_cast<int>(run.model.labels[run.state[t]]) != l) continue;
      r.push_back(market.returns[t]);
      flow += market.flow[index(InvestorType::Foreign)][t];
    }
    s.days = r.size();
    if (r.empty()) {
      s.mean = s.volatility = s.sharpe = s.foreign_flow = kNaN;
      continue;
    }
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double ss = 0.0;
    for (double v : r) ss += (v - mean) * (v - mean);
    const double sd = r.size() > 1 ? std::sqrt(ss / static_cast<double>(r.size() - 1)) : kNaN;
    s.mean = mean;
    s.volatility = sd;
    s.sharpe = sd > 0.0 ? mean / sd * std::sqrt(252.0) : kNaN;
    s.foreign_flow = flow / static_cast<double>(r.size());
  }
  return out;
}

std::vector<econ::SignalSeries> signal_series(const std::vector<FlowSeries>& stocks, const FilterSet* filters,
                                              InvestorType investor) {
  std::vector<econ::SignalSeries> out(stocks.size());
  const auto j = index(investor);
  for (std::size_t i = 0; i < stocks.size(); ++i) {
    out[i].dates = stocks[i].dates;
    out[i].returns = stocks[i].returns;
    out[i].signal = filters ? filters->stocks[i][j].output.filtered : stocks[i].flow[j];
  }
  return out;
}

regime::RegimeRegression regime_regression(const IngestResult& data, const FilterSet& filters,
                                           const RegimeRun& regimes, InvestorType investor) {
  return regime::regime_conditional_regression(signal_series(data.stocks, &filters, investor), regimes.dates,
                                               regimes.state, regimes.model);
}

// ---------------------------------------------------------------------------
// Econometrics tables

std::vector<econ::AsymmetryRow> asymmetry_table(const IngestResult& data, const RunConfig& config) {
  const auto& market = data.market;
  const auto shocks = econ::shock_indicators(market.returns, market.realized_vol, config.asymmetry.shock_multiple);
  const auto pos = calendar_index(market.dates);
  econ::Covariance covariance = econ::Covariance::Conventional;
  switch (config.asymmetry.errors) {
    case AsymmetryConfig::Errors::Conventional: break;
    case AsymmetryConfig::Errors::Robust: covariance = econ::Covariance::Robust; break;
    case AsymmetryConfig::Errors::ClusteredByDate: covariance = econ::Covariance::ClusteredByGroup; break;
  }
  std::vector<econ::AsymmetryRow> rows;
  for (auto investor : kInvestorTypes) {
    econ::FlowPanel panel;
    for (const auto& s : data.stocks) {
      std::vector<std::size_t> idx(s.size());
      for (std::size_t t = 0; t < s.size(); ++t) idx[t] = pos.at(s.dates[t]);
      panel.date_index.push_back(std::move(idx));
      panel.flow.push_back(s.flow[index(investor)]);
      if (config.asymmetry.stock_level_sigma) {
        panel.stock_shocks.push_back(
            econ::shock_indicators(s.returns, s.realized_vol, config.asymmetry.shock_multiple));
      }
    }
    rows.push_back(econ::asymmetry_fit(investor, panel, shocks, config.asymmetry.return_scale,
                                       config.asymmetry.level_mode, covariance));
  }
  return rows;
}

std::vector<econ::PredictiveRow> predictive_table(const IngestResult& data, const FilterSet& filters) {
  std::vector<econ::PredictiveRow> rows;
  for (auto investor : kInvestorTypes) {
    const auto raw = signal_series(data.stocks, nullptr, investor);
    const auto filt = signal_series(data.stocks, &filters, investor);
    for (int h : kHorizons) rows.push_back(econ::predictive_row(investor, h, raw, filt));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Backtest

std::vector<std::uint8_t> momentum_profile(const IngestResult& data, InvestorType investor, const RunConfig& config) {
  const auto& market = data.market;
  const auto T = market.size();
  const auto shocks = econ::shock_indicators(market.returns, market.realized_vol, config.asymmetry.shock_multiple);
  const auto pos = calendar_index(market.dates);
  const double c = config.asymmetry.return_scale;
  const bool level = config.asymmetry.level_mode;

  // Per-date contributions to X'X and X'y with X = (1, x+, x-).
  std::vector<Eigen::Matrix3d> xtx(T, Eigen::Matrix3d::Zero());
  std::vector<Eigen::Vector3d> xty(T, Eigen::Vector3d::Zero());
  for (const auto& s : data.stocks) {
    const auto& f = s.flow[index(investor)];
    std::size_t prev = 0;
    for (std::size_t t = 0; t < s.size(); ++t) {
      const auto m = pos.at(s.dates[t]);
      const bool usable = level || (t > 0 && prev + 1 == m);
      prev = m;
      if (!usable) continue;
      const double y = level ? f[t] : f[t] - f[t - 1];
      const double mag = shocks.magnitude[m] * c;
      const Eigen::Vector3d x(1.0, shocks.positive[m] ? mag : 0.0, shocks.negative[m] ? mag : 0.0);
      xtx[m] += x * x.transpose();
      xty[m] += x * y;
    }
  }

  std::vector<std::uint8_t> out(T, 0);
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t m = 0; m < T; ++m) {
    A += xtx[m];
    b += xty[m];
    n_pos += shocks.positive[m];
    n_neg += shocks.negative[m];
    if (n_pos < kMinProfileShocks || n_neg < kMinProfileShocks) continue;
    const Eigen::Vector3d beta = A.ldlt().solve(b);
    if (!beta.allFinite()) continue;
    const double bp = beta(1), bm = beta(2);
    if (std::abs(bp) > 1e-12) {
      const double ratio = bm / bp;
      out[m] = ratio >= 0.0 && ratio < 1.0 ? 1 : 0;
    }
  }
  return out;
}

backtest::StrategySpec strategy_spec(const RunConfig& config, InvestorType investor, Variant variant) {
  backtest::StrategySpec spec;
  spec.variant = variant;
  spec.investor = investor;
  spec.decile = config.backtest.decile;
  spec.threshold_cap = config.backtest.threshold_cap;
  spec.stop_loss = config.backtest.stop_loss && config.backtest.stop_loss_profile != StopLossProfile::Off;
  spec.orientation = config.backtest.orientation[index(investor)];
  spec.cost_bps = config.backtest.cost_bps;
  spec.annualization = config.backtest.annualization;
  return spec;
}

BacktestRun run_backtest(const ValidatedPanel& panel, const RunConfig& config) {
  config.validate();
  std::set<Date> calendar;
  for (const auto& r : panel.rows()) calendar.insert(r.date);
  const auto train = static_cast<std::size_t>(config.backtest.train_days);
  if (calendar.size() < train + 2) {
    throw Error(ErrorCode::SeriesTooShort, "backtest: panel has " + std::to_string(calendar.size()) +
                                               " dates; need train_days + 2 = " + std::to_string(train + 2));
  }
  BacktestRun run;
  run.train_end = *std::next(calendar.begin(), static_cast<std::ptrdiff_t>(train - 1));

  auto options = IngestOptions::from(config);
  options.winsor_fit_end = run.train_end;
  const auto data = build_flow_series(panel, options);
  const auto filters = run_filters(data.stocks, config, run.train_end);
  const auto regimes = run_regime(data.market, config, run.train_end);

  const auto& market = data.market;
  const auto T = static_cast<Eigen::Index>(market.size());
  const auto N = static_cast<Eigen::Index>(data.stocks.size());
  const auto pos = calendar_index(market.dates);

  auto& in = run.market;
  in.dates = market.dates;
  in.returns = Eigen::MatrixXd::Constant(T, N, kNaN);
  run.caps = Eigen::MatrixXd::Constant(T, N, kNaN);
  for (auto investor : kInvestorTypes) {
    run.raw[index(investor)] = Eigen::MatrixXd::Constant(T, N, kNaN);
    run.filtered[index(investor)] = Eigen::MatrixXd::Constant(T, N, kNaN);
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& s = data.stocks[static_cast<std::size_t>(i)];
    run.stock_ids.push_back(s.stock_id);
    for (std::size_t t = 0; t < s.size(); ++t) {
      const auto m = static_cast<Eigen::Index>(pos.at(s.dates[t]));
      in.returns(m, i) = s.returns[t];
      run.caps(m, i) = s.market_cap[t];
      for (auto investor : kInvestorTypes) {
        const auto j = index(investor);
        run.raw[j](m, i) = s.flow[j][t];
        run.filtered[j](m, i) = filters.stocks[static_cast<std::size_t>(i)][j].output.filtered[t];
      }
    }
  }

  const auto n = static_cast<std::size_t>(T);
  in.tradable.resize(n);
  in.crisis_probability.resize(n);
  in.regime_label.resize(n);
  in.negative_shock_day.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    in.tradable[t] = market.dates[t] > run.train_end ? 1 : 0;
    in.crisis_probability[t] = regimes.crisis_probability(t);
    in.regime_label[t] = static_cast<int>(regimes.model.labels[regimes.state[t]]);
    const double sigma = market.realized_vol[t];
    in.negative_shock_day[t] =
        sigma > 0.0 && market.returns[t] < -config.asymmetry.shock_multiple * sigma ? 1 : 0;
  }

  for (auto investor : kInvestorTypes) {
    auto& profile = run.momentum_profile[index(investor)];
    switch (config.backtest.stop_loss_profile) {
      case StopLossProfile::Auto: profile = momentum_profile(data, investor, config); break;
      case StopLossProfile::Momentum: profile.assign(n, 1); break;
      case StopLossProfile::Contrarian:
      case StopLossProfile::Off: profile.assign(n, 0); break;
    }
  }

  parallel_for(kNumInvestorTypes * kVariants.size(), [&](std::size_t k) {
    const auto j = k / kVariants.size();
    const auto v = kVariants[k % kVariants.size()];
    const auto spec = strategy_spec(config, kInvestorTypes[j], v);
    const auto& signal = v == Variant::StaticRaw ? run.raw[j] : run.filtered[j];
    auto& weights = run.weights[j][k % kVariants.size()];
    weights = backtest::build_positions(signal, in, run.momentum_profile[j], spec);
    run.reports[j][k % kVariants.size()] = backtest::run_backtest(weights, in, spec);
  });
  return run;
}

backtest::RobustnessReport run_robustness(const BacktestRun& run, const RunConfig& config) {
  const auto j = index(config.backtest.robustness_investor);
  const auto v = config.backtest.robustness_variant;
  const auto& report = run.reports[j][static_cast<std::size_t>(v)];
  const auto& signal = v == Variant::StaticRaw ? run.raw[j] : run.filtered[j];
  backtest::RobustnessOptions options;
  options.bootstrap_iterations = config.bootstrap.iterations;
  options.block_length = config.bootstrap.block_length;
  options.seed = config.seed;
  return backtest::run_robustness(report, signal, run.market, run.caps, run.momentum_profile[j], options);
}

// ---------------------------------------------------------------------------
// Writers

Paths write_simulation(const fs::path& dir, const synth::Generated& gen) {
  fs::create_directories(dir);
  const auto panel_path = dir / "panel.csv";
  auto tmp = panel_path;
  tmp += ".partial";
  write_panel_csv(tmp, gen.rows);
  fs::rename(tmp, panel_path);

  const auto& t = gen.truth;
  const auto& s = t.spec;
  json spec{{"regime_mean", s.regime_mean},
            {"regime_sd", s.regime_sd},
            {"regime_beta", s.regime_beta},
            {"signal_investor", to_string(s.signal_investor)},
            {"beta_plus", s.beta_plus},
            {"beta_minus", s.beta_minus},
            {"flow_mean", s.flow_mean},
            {"shock_multiple", s.shock_multiple},
            {"shock_persistence", s.shock_persistence},
            {"return_scale", s.return_scale},
            {"phi", s.phi},
            {"state_noise", s.state_noise},
            {"measurement_noise", s.measurement_noise},
            {"gamma", s.gamma},
            {"idiosyncratic_ratio", s.idiosyncratic_ratio},
            {"size_elasticity", s.size_elasticity},
            {"n_stocks", s.n_stocks},
            {"n_days", s.n_days},
            {"seed", s.seed},
            {"start_date", s.start_date.iso()},
            {"cap_min", s.cap_min},
            {"cap_max", s.cap_max},
            {"base_turnover", s.base_turnover},
            {"ewma_decay", s.ewma_decay},
            {"vol_seed_window", s.vol_seed_window}};
  json transition = json::array();
  for (int i = 0; i < 3; ++i) {
    transition.push_back({s.transition(i, 0), s.transition(i, 1), s.transition(i, 2)});
  }
  spec["transition"] = transition;

  json dates = json::array();
  for (const auto& d : t.dates) dates.push_back(d.iso());
  json theta = json::object();
  for (std::size_t i = 0; i < t.stock_ids.size(); ++i) {
    json per = json::object();
    for (auto investor : kInvestorTypes) per[std::string(short_code(investor))] = t.theta[i][index(investor)];
    theta[t.stock_ids[i]] = per;
  }
  json doc{{"spec", spec},
           {"dates", dates},
           {"regime", t.regime},
           {"market_factor", t.market_factor},
           {"market_return", t.market_return},
           {"stock_ids", t.stock_ids},
           {"initial_cap", t.initial_cap},
           {"size_multiplier", t.size_multiplier},
           {"positive_shock", t.positive_shock},
           {"negative_shock", t.negative_shock},
           {"theta", theta}};
  write_json(dir / "truth.json", doc);
  return {panel_path, dir / "truth.json"};
}

Paths write_ingest(const fs::path& dir, const IngestResult& data) {
  const auto series = dir / "series.csv";
  write_csv_atomic(series,
                   {"stock_id", "date", "flow_for", "flow_ins", "flow_ind", "return", "sigma", "sigma_bar", "mcap"},
                   [&](CsvWriter& w) {
                     auto emit = [&](const FlowSeries& s) {
                       for (std::size_t t = 0; t < s.size(); ++t) {
                         w << s.stock_id << s.dates[t].iso() << s.flow[0][t] << s.flow[1][t] << s.flow[2][t]
                           << s.returns[t] << s.realized_vol[t] << s.vol_baseline[t] << s.market_cap[t];
                         w.end_row();
                       }
                     };
                     for (const auto& s : data.stocks) emit(s);
                     emit(data.market);
                   });
  const auto& st = data.stats;
  json stats{{"rows_read", st.rows_read},
             {"rows_retained", st.rows_retained},
             {"rows_dropped", st.rows_dropped},
             {"rows_dropped_total", st.dropped_total()},
             {"stocks_read", st.stocks_read},
             {"stocks_retained", st.stocks_retained},
             {"first_date", st.first_date ? json(st.first_date->iso()) : json(nullptr)},
             {"last_date", st.last_date ? json(st.last_date->iso()) : json(nullptr)},
             {"balanced", st.balanced()}};
  write_json(dir / "ingest_stats.json", stats);
  return {series, dir / "ingest_stats.json"};
}

Paths write_filters(const fs::path& dir, const IngestResult& data, const FilterSet& filters) {
  Paths out;
  const auto sub = dir / "filtered";
  fs::create_directories(sub);
  for (std::size_t i = 0; i < data.stocks.size(); ++i) {
    const auto& s = data.stocks[i];
    for (auto investor : kInvestorTypes) {
      const auto j = index(investor);
      const auto& o = filters.stocks[i][j].output;
      const auto path = sub / (s.stock_id + "_" + std::string(short_code(investor)) + ".csv");
      write_csv_atomic(path, {"date", "raw", "filtered", "gain", "r_t"}, [&](CsvWriter& w) {
        for (std::size_t t = 0; t < s.size(); ++t) {
          w << s.dates[t].iso() << s.flow[j][t] << o.filtered[t] << o.gain[t] << o.measurement_var[t];
          w.end_row();
        }
      });
      out.push_back(path);
    }
  }
  const auto params = dir / "kalman_params.csv";
  write_csv_atomic(params,
                   {"stock_id", "investor", "phi", "state_noise", "measurement_noise", "gamma", "estimated",
                    "degenerate", "log_likelihood", "mean_gain"},
                   [&](CsvWriter& w) {
                     for (std::size_t i = 0; i < data.stocks.size(); ++i) {
                       for (auto investor : kInvestorTypes) {
                         const auto& f = filters.stocks[i][index(investor)];
                         double g = 0.0;
                         for (double v : f.output.gain) g += v;
                         g /= std::max<std::size_t>(1, f.output.gain.size());
                         w << data.stocks[i].stock_id << to_string(investor) << f.params.phi << f.params.state_noise
                           << f.params.measurement_noise << f.params.gamma << (f.estimated ? 1 : 0)
                           << (f.degenerate ? 1 : 0) << f.output.log_likelihood << g;
                         w.end_row();
                       }
                     }
                   });
  out.push_back(params);
  return out;
}

Paths write_regime(const fs::path& dir, const IngestResult& data, const RegimeRun& regimes,
                   const regime::RegimeRegression& regression, const RunConfig& config) {
  const auto& m = regimes.model;
  const int ib = m.index_of(regime::Label::Bull);
  const int in = m.index_of(regime::Label::Normal);
  const int ic = m.index_of(regime::Label::Crisis);
  const auto csv = dir / "regimes.csv";
  write_csv_atomic(csv, {"date", "p_bull", "p_normal", "p_crisis", "state", "crisis_flag"}, [&](CsvWriter& w) {
    for (std::size_t t = 0; t < regimes.dates.size(); ++t) {
      const auto& p = regimes.path.filtered[t];
      w << regimes.dates[t].iso() << p[ib] << p[in] << p[ic] << regime::to_string(m.labels[regimes.state[t]])
        << static_cast<int>(regimes.crisis[t]);
      w.end_row();
    }
  });

  json model;
  json labels = json::array();
  json mean = json::array(), sd = json::array(), P = json::array();
  for (int i = 0; i < regime::kStates; ++i) {
    labels.push_back(regime::to_string(m.labels[i]));
    mean.push_back(m.mean[i]);
    sd.push_back(m.sd[i]);
    P.push_back({m.transition(i, 0), m.transition(i, 1), m.transition(i, 2)});
  }
  model["labels"] = labels;
  model["mean"] = mean;
  model["sd"] = sd;
  model["transition"] = P;
  model["initial"] = m.initial;
  model["stationary"] = regime::stationary_distribution(m.transition);
  model["log_likelihood"] = m.log_likelihood;
  model["loglik_trace"] = m.loglik_trace;
  model["iterations"] = m.iterations;
  model["converged"] = m.converged;
  model["restarts"] = m.restarts;
  model["tie_break"] = m.tie_break;
  model["separation"] = m.separation;
  model["merged"] = m.merged;
  model["crisis_threshold"] = config.regime.crisis_threshold;
  std::size_t crisis_days = 0;
  for (auto f : regimes.crisis) crisis_days += f;
  model["crisis_days"] = crisis_days;

  json table = json::array();
  for (const auto& s : summarize_regimes(regimes, data.market)) {
    table.push_back({{"regime", regime::to_string(s.label)},
                     {"days", s.days},
                     {"mean_return", number(s.mean)},
                     {"volatility", number(s.volatility)},
                     {"sharpe", number(s.sharpe)},
                     {"foreign_flow", number(s.foreign_flow)}});
  }
  model["characteristics"] = table;
  json reg = json::array();
  for (const auto& f : regression.fits) {
    reg.push_back({{"regime", regime::to_string(f.label)},
                   {"beta", number(f.beta)},
                   {"t", number(f.t_beta)},
                   {"se", number(f.se_beta)},
                   {"r2", number(f.r2)},
                   {"n", f.n},
                   {"skipped", f.skipped}});
  }
  model["foreign_regression"] = reg;
  write_json(dir / "regime_model.json", model);
  return {csv, dir / "regime_model.json"};
}

Paths write_asymmetry(const fs::path& dir, const std::vector<econ::AsymmetryRow>& rows) {
  const auto path = dir / "asymmetry.csv";
  write_csv_atomic(path,
                   {"Investor Type", "beta+", "t(beta+)", "beta-", "t(beta-)", "Ratio", "p-value", "Wald", "N",
                    "Positive Shocks", "Negative Shocks", "Partial"},
                   [&](CsvWriter& w) {
                     for (const auto& r : rows) {
                       w << to_string(r.investor) << r.beta_plus << r.t_plus << r.beta_minus << r.t_minus << r.ratio
                         << r.p_value << r.wald << r.n << r.positive_shocks << r.negative_shocks
                         << (r.partial ? 1 : 0);
                       w.end_row();
                     }
                   });
  return {path};
}

Paths write_predictive(const fs::path& dir, const std::vector<econ::PredictiveRow>& rows) {
  const auto path = dir / "predictive.csv";
  write_csv_atomic(path,
                   {"Investor", "Horizon", "t_raw", "t_filtered", "R2_raw", "R2_filtered", "Improvement", "N"},
                   [&](CsvWriter& w) {
                     for (const auto& r : rows) {
                       w << to_string(r.investor) << horizon_name(r.horizon) << r.t_raw << r.t_filtered << r.r2_raw
                         << r.r2_filtered << r.improvement << r.n;
                       w.end_row();
                     }
                   });
  return {path};
}

Paths write_backtest(const fs::path& dir, const BacktestRun& run, const RunConfig& config) {
  const auto j = index(config.backtest.robustness_investor);
  const auto equity = dir / "equity.csv";
  write_csv_atomic(equity, {"date", "variant", "equity", "drawdown"}, [&](CsvWriter& w) {
    for (std::size_t v = 0; v < kVariants.size(); ++v) {
      const auto& rep = run.reports[j][v];
      for (std::size_t t = 0; t < rep.dates.size(); ++t) {
        w << rep.dates[t].iso() << to_string(kVariants[v]) << rep.equity[t] << rep.drawdown[t];
        w.end_row();
      }
    }
  });

  json table = json::array();
  for (auto investor : kInvestorTypes) {
    for (std::size_t v = 0; v < kVariants.size(); ++v) {
      const auto& rep = run.reports[index(investor)][v];
      auto row = metrics_json(rep.metrics);
      row["investor"] = to_string(investor);
      row["strategy"] = variant_title(kVariants[v]);
      row["turnover"] = number(rep.turnover);
      row["first_return_date"] = rep.dates.empty() ? json(nullptr) : json(rep.dates.front().iso());
      json regime_sharpe = json::object();
      for (int l = 0; l < 3; ++l) {
        regime_sharpe[std::string(regime::to_string(static_cast<regime::Label>(l)))] =
            json{{"sharpe", number(rep.regime_sharpe[static_cast<std::size_t>(l)])},
                 {"days", rep.regime_days[static_cast<std::size_t>(l)]}};
      }
      row["per_regime"] = regime_sharpe;
      table.push_back(row);
    }
  }
  json doc{{"train_end", run.train_end.iso()},
           {"equity_investor", to_string(config.backtest.robustness_investor)},
           {"annualization", config.backtest.annualization},
           {"cost_bps", config.backtest.cost_bps},
           {"strategies", table}};
  write_json(dir / "metrics.json", doc);
  return {equity, dir / "metrics.json"};
}

Paths write_robustness(const fs::path& dir, const backtest::RobustnessReport& report, const RunConfig& config) {
  json a = json::array(), b = json::array();
  for (const auto& r : report.subperiods) a.push_back(robustness_row_json(r));
  for (const auto& r : report.size_quintiles) b.push_back(robustness_row_json(r));
  json c = json::array();
  c.push_back(json{{"category", "Bootstrap"}, {"specification", "Sharpe 95% CI"}, {"ci", bootstrap_json(report.sharpe_ci)}});
  c.push_back(json{{"category", "Bootstrap"}, {"specification", "Calmar 95% CI"}, {"ci", bootstrap_json(report.calmar_ci)}});
  json doc{{"investor", to_string(config.backtest.robustness_investor)},
           {"strategy", variant_title(config.backtest.robustness_variant)},
           {"panel_a_subperiods", a},
           {"panel_b_size_quintiles", b},
           {"panel_c_bootstrap", c}};
  write_json(dir / "robustness.json", doc);
  return {dir / "robustness.json"};
}

// ---------------------------------------------------------------------------
// Report

namespace {

void csv_as_markdown(std::ostringstream& out, const fs::path& path) {
  const auto table = read_csv(path);
  out << '|';
  for (const auto& h : table.header) out << ' ' << h << " |";
  out << "\n|";
  for (std::size_t i = 0; i < table.header.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& row : table.rows) {
    out << '|';
    for (const auto& cell : row) out << ' ' << cell << " |";
    out << '\n';
  }
  out << '\n';
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

double as_double(const json& j) { return j.is_number() ? j.get<double>() : kNaN; }

}  // namespace

std::string render_report(const fs::path& dir) {
  std::ostringstream out;
  out << "# regimeflow report\n\n";
  if (fs::exists(dir / "ingest_stats.json")) {
    const auto s = read_json_file(dir / "ingest_stats.json");
    out << "## Data\n\n"
        << "Rows read " << s["rows_read"] << ", retained " << s["rows_retained"] << "; stocks retained "
        << s["stocks_retained"] << " of " << s["stocks_read"] << ".\n\n";
  }
  if (fs::exists(dir / "predictive.csv")) {
    out << "## Predictive regressions (raw vs filtered)\n\n";
    csv_as_markdown(out, dir / "predictive.csv");
  }
  if (fs::exists(dir / "regime_model.json")) {
    const auto m = read_json_file(dir / "regime_model.json");
    out << "## Regimes\n\n| Regime | Days | Mean Return | Volatility | Sharpe | Foreign Flow |\n|---|---|---|---|---|---|\n";
    for (const auto& r : m["characteristics"]) {
      out << "| " << r["regime"].get<std::string>() << " | " << r["days"] << " | "
          << percent(as_double(r["mean_return"])) << " | " << percent(as_double(r["volatility"]), 2) << " | "
          << fixed(as_double(r["sharpe"]), 2) << " | " << percent(as_double(r["foreign_flow"]), 4) << " |\n";
    }
    out << "\nForeign-flow coefficient by regime:\n\n| Regime | beta | t | N |\n|---|---|---|---|\n";
    for (const auto& r : m["foreign_regression"]) {
      out << "| " << r["regime"].get<std::string>() << " | " << fixed(as_double(r["beta"]), 6) << " | "
          << fixed(as_double(r["t"]), 2) << " | " << r["n"] << " |\n";
    }
    out << "\nCrisis days (filtered probability above threshold): " << m["crisis_days"] << "\n\n";
  }
  if (fs::exists(dir / "asymmetry.csv")) {
    out << "## Asymmetric responses\n\n";
    csv_as_markdown(out, dir / "asymmetry.csv");
  }
  if (fs::exists(dir / "metrics.json")) {
    const auto m = read_json_file(dir / "metrics.json");
    out << "## Strategies\n\nTrading starts after " << m["train_end"].get<std::string>()
        << ".\n\n| Investor | Strategy | Return | Sharpe | Calmar | Max DD |\n|---|---|---|---|---|---|\n";
    for (const auto& r : m["strategies"]) {
      out << "| " << r["investor"].get<std::string>() << " | " << r["strategy"].get<std::string>() << " | "
          << percent(as_double(r["total_return"]), 2) << " | " << fixed(as_double(r["sharpe"])) << " | "
          << fixed(as_double(r["calmar"])) << " | " << percent(-as_double(r["max_drawdown"]), 1) << " |\n";
    }
    out << '\n';
  }
  if (fs::exists(dir / "robustness.json")) {
    const auto r = read_json_file(dir / "robustness.json");
    out << "## Robustness (" << r["investor"].get<std::string>() << ", " << r["strategy"].get<std::string>()
        << ")\n\n| Category | Specification | Sharpe | Calmar | N |\n|---|---|---|---|---|\n";
    for (const char* panel : {"panel_a_subperiods", "panel_b_size_quintiles"}) {
      for (const auto& row : r[panel]) {
        out << "| " << row["category"].get<std::string>() << " | " << row["specification"].get<std::string>()
            << " | " << fixed(as_double(row["sharpe"])) << " | " << fixed(as_double(row["calmar"])) << " | "
            << row["n"] << " |\n";
      }
    }
    for (const auto& row : r["panel_c_bootstrap"]) {
      const auto& ci = row["ci"];
      out << "| Bootstrap | " << row["specification"].get<std::string>() << " | [" << fixed(as_double(ci["lower"]))
          << ", " << fixed(as_double(ci["upper"])) << "] | | |\n";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace regimeflow::pipeline
