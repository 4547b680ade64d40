// Acceptance checks. One PASS/FAIL line per criterion, followed by the
// measured quantities. Usage: acceptance <path-to-regimeflow-cli> [criterion...]
//
// Every seed below was fixed before the first run; nothing is retried.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "regimeflow/backtest.hpp"
#include "regimeflow/econometrics.hpp"
#include "regimeflow/ingest.hpp"
#include "regimeflow/kalman.hpp"
#include "regimeflow/pipeline.hpp"
#include "regimeflow/regime.hpp"
#include "regimeflow/synth.hpp"

namespace fs = std::filesystem;
using namespace regimeflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

fs::path g_cli;

// ---------------------------------------------------------------------------
// Hamilton filter vs exhaustive path enumeration

double normal_pdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

struct Enumerated {
  std::vector<regime::Probs> filtered, smoothed;
  double log_likelihood = 0.0;
};

// Sums the joint density of every state path. Filtered marginals at t use
// the paths truncated at t; smoothed ones use the full paths.
Enumerated enumerate_paths(const std::vector<double>& r, const regime::Model& m) {
  const int T = static_cast<int>(r.size());
  Enumerated out;
  out.filtered.resize(T);
  out.smoothed.assign(T, regime::Probs{});
  for (int t = 0; t < T; ++t) {
    const int len = t + 1;
    int count = 1;
    for (int k = 0; k < len; ++k) count *= 3;
    regime::Probs mass{};
    double total = 0.0;
    std::vector<int> s(len);
    for (int code = 0; code < count; ++code) {
      int c = code;
      for (int k = 0; k < len; ++k) {
        s[k] = c % 3;
        c /= 3;
      }
      double p = m.initial[s[0]] * normal_pdf(r[0], m.mean[s[0]], m.sd[s[0]]);
      for (int k = 1; k < len; ++k) p *= m.transition(s[k - 1], s[k]) * normal_pdf(r[k], m.mean[s[k]], m.sd[s[k]]);
      total += p;
      mass[s[t]] += p;
      if (t == T - 1) {
        for (int k = 0; k < len; ++k) out.smoothed[k][s[k]] += p;
      }
    }
    for (int j = 0; j < 3; ++j) out.filtered[t][j] = mass[j] / total;
    if (t == T - 1) {
      out.log_likelihood = std::log(total);
      for (auto& row : out.smoothed)
        for (auto& v : row) v /= total;
    }
  }
  return out;
}

Outcome hamilton_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst = 0.0;
  int cases = 0;
  for (int rep = 0; rep < 40; ++rep) {
    regime::Model m;
    for (int i = 0; i < 3; ++i) {
      double row = 0.0;
      for (int j = 0; j < 3; ++j) row += (m.transition(i, j) = u(rng));
      m.transition.row(i) /= row;
      m.mean[i] = 0.01 * z(rng);
      m.sd[i] = 0.005 + 0.03 * u(rng);
    }
    double init = 0.0;
    for (auto& p : m.initial) init += (p = u(rng));
    for (auto& p : m.initial) p /= init;
    for (int T = 1; T <= 8; ++T) {
      std::vector<double> r(T);
      for (auto& x : r) x = 0.02 * z(rng);
      const auto oracle = enumerate_paths(r, m);
      auto path = regime::hamilton_filter(r, m);
      path.smoothed = regime::kim_smoother(path, m);
      for (int t = 0; t < T; ++t) {
        for (int j = 0; j < 3; ++j) {
          worst = std::max(worst, std::abs(path.filtered[t][j] - oracle.filtered[t][j]));
          worst = std::max(worst, std::abs(path.smoothed[t][j] - oracle.smoothed[t][j]));
        }
      }
      worst = std::max(worst, std::abs(path.log_likelihood - oracle.log_likelihood));
      ++cases;
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-10 && secs < 1.0,
          fmt("%d series (T=1..8), max abs error %.2e (tol 1e-10), runtime %.3fs (limit 1s)", cases, worst, secs)};
}

// ---------------------------------------------------------------------------
// Kalman filter vs batch Gaussian conditioning; Riccati fixed point

Outcome kalman_oracle() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  double worst_mean = 0.0, worst_var = 0.0;
  struct Case {
    double phi, Q, R0, gamma;
  };
  // Unit-scale cases make the absolute tolerance bite; the last one is the
  // production calibration.
  const Case cases[] = {{0.9, 0.3, 1.0, 1.0}, {0.5, 1.0, 0.2, 2.0}, {0.99, 0.05, 2.0, 0.0}, {0.95, 1e-8, 1e-6, 1.0}};
  const int T = 50;
  for (const auto& c : cases) {
    const kalman::Params p{c.phi, c.Q, c.R0, c.gamma};
    std::vector<double> sigma(T), sigma_bar(T), obs(T), R(T);
    for (int t = 0; t < T; ++t) {
      sigma[t] = u(rng);
      sigma_bar[t] = u(rng);
      R[t] = c.R0 * std::pow(sigma[t] / sigma_bar[t], c.gamma);
    }
    // Draw the series from the model itself.
    double theta = std::sqrt(p.stationary_variance()) * z(rng);
    for (int t = 0; t < T; ++t) {
      if (t > 0) theta = c.phi * theta + std::sqrt(c.Q) * z(rng);
      obs[t] = theta + std::sqrt(R[t]) * z(rng);
    }
    const auto out = kalman::filter_series(obs, sigma, sigma_bar, p);
    // theta_0..T-1 is jointly Gaussian with Cov = P0 phi^|i-j|.
    const double P0 = c.Q / (1.0 - c.phi * c.phi);
    const double scale = 1.0 / c.R0;  // condition in units of R0
    for (int t = 0; t < T; ++t) {
      const int n = t + 1;
      Eigen::MatrixXd S(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) S(i, j) = scale * P0 * std::pow(c.phi, std::abs(i - j));
      Eigen::MatrixXd A = S;
      for (int i = 0; i < n; ++i) A(i, i) += scale * R[i];
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) y(i) = obs[i];
      const Eigen::VectorXd cross = S.row(t).transpose();
      const auto ldlt = A.ldlt();
      const double mean = cross.dot(ldlt.solve(y));
      const double var = (scale * P0 - cross.dot(ldlt.solve(cross))) / scale;
      worst_mean = std::max(worst_mean, std::abs(mean - out.filtered[t]));
      worst_var = std::max(worst_var, std::abs(var - out.posterior_var[t]));
    }
  }

  // Steady-state gain: iterate the predicted-variance recursion to rest.
  double worst_gain = 0.0;
  const Case steady[] = {{0.95, 1e-8, 1e-6, 0}, {0.9, 0.3, 1.0, 0}, {0.5, 1.0, 0.2, 0}, {0.99, 1e-4, 1e-2, 0}};
  for (const auto& c : steady) {
    double P = c.Q / (1.0 - c.phi * c.phi);
    for (int it = 0; it < 200000; ++it) {
      const double next = c.phi * c.phi * P * c.R0 / (P + c.R0) + c.Q;
      if (next == P) break;
      P = next;
    }
    worst_gain = std::max(worst_gain, std::abs(P / (P + c.R0) - kalman::steady_state_gain(c.phi, c.Q, c.R0)));
  }
  return {worst_mean <= 1e-10 && worst_var <= 1e-10 && worst_gain <= 1e-8,
          fmt("T=50, max |mean err| %.2e, max |var err| %.2e (tol 1e-10); steady gain err %.2e (tol 1e-8)",
              worst_mean, worst_var, worst_gain)};
}

// ---------------------------------------------------------------------------
// EM recovery on the market-level series

Outcome em_recovery() {
  synth::SynthSpec spec;
  const int T = 3000;
  const auto start = Clock::now();
  const auto series = synth::generate_market_returns(spec, T, 303);
  const auto model = regime::fit_em(series.returns);
  auto path = regime::hamilton_filter(series.returns, model);
  path.smoothed = regime::kim_smoother(path, model);
  const double secs = seconds_since(start);

  // Monte Carlo s.e. of each regime mean: spread of the EM estimate over
  // independent replications of the same design.
  const int reps = 30;
  std::array<std::vector<double>, 3> draws;
  for (int r = 0; r < reps; ++r) {
    const auto rep = synth::generate_market_returns(spec, T, 30300 + r);
    const auto fit = regime::fit_em(rep.returns);
    for (int l = 0; l < 3; ++l) draws[l].push_back(fit.mean[fit.index_of(static_cast<regime::Label>(l))]);
  }

  bool ok = true;
  std::string detail;
  const std::array<double, 3> target_share{0.43, 0.49, 0.08};
  for (int l = 0; l < 3; ++l) {
    const int k = model.index_of(static_cast<regime::Label>(l));
    double m1 = 0.0, m2 = 0.0;
    for (double v : draws[l]) m1 += v;
    m1 /= reps;
    for (double v : draws[l]) m2 += (v - m1) * (v - m1);
    const double mc_se = std::sqrt(m2 / (reps - 1));
    const double mu_err = std::abs(model.mean[k] - spec.regime_mean[l]) / mc_se;
    const double sd_err = std::abs(model.sd[k] / spec.regime_sd[l] - 1.0);
    double share = 0.0;
    for (const auto& p : path.smoothed) share += p[k];
    share /= T;
    ok = ok && mu_err <= 2.0 && sd_err <= 0.10 && std::abs(share - target_share[l]) <= 0.05;
    detail += fmt("%s mu %.5f (%.2f MC s.e.) sd %.4f (%.1f%% off) share %.3f; ",
                  std::string(regime::to_string(static_cast<regime::Label>(l))).c_str(), model.mean[k], mu_err,
                  model.sd[k], 100 * sd_err, share);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < model.loglik_trace.size(); ++i) {
    const double prev = model.loglik_trace[i - 1];
    if (model.loglik_trace[i] < prev - 1e-9 * std::abs(prev)) monotone = false;
  }
  ok = ok && monotone && secs < 30.0;
  detail += fmt("loglik %s over %zu iterations, fit runtime %.2fs", monotone ? "monotone" : "NOT monotone",
                model.loglik_trace.size(), secs);
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// Shared synthetic-panel helpers

struct SynthRun {
  synth::Generated gen;
  IngestResult data;
};

SynthRun simulate(synth::SynthSpec spec, const RunConfig& cfg) {
  SynthRun out;
  out.gen = synth::generate_panel(spec);
  out.data = build_flow_series(validate_panel(out.gen.rows), IngestOptions::from(cfg));
  return out;
}

std::map<Date, std::size_t> calendar(const std::vector<Date>& dates) {
  std::map<Date, std::size_t> out;
  for (std::size_t t = 0; t < dates.size(); ++t) out.emplace(dates[t], t);
  return out;
}

std::size_t stock_number(const std::string& id) { return static_cast<std::size_t>(std::stoul(id.substr(1))); }

// ---------------------------------------------------------------------------
// Regime-conditional beta recovery

Outcome beta_recovery() {
  const auto start = Clock::now();
  synth::SynthSpec spec;
  spec.n_stocks = 500;
  spec.n_days = 1200;
  spec.seed = 404;
  RunConfig cfg;
  const auto run = simulate(spec, cfg);
  const auto regimes = pipeline::run_regime(run.data.market, cfg);
  const auto filters = pipeline::run_filters(run.data.stocks, cfg);
  const auto reg = pipeline::regime_regression(run.data, filters, regimes, InvestorType::Foreign);
  const double secs = seconds_since(start);

  // Planted betas are per stationary SD of the latent signal.
  const double scale = spec.signal_scale();
  bool ok = true;
  std::string detail;
  for (int l = 0; l < 3; ++l) {
    const auto& f = reg.fits[l];
    const double b = f.beta * scale, se = f.se_beta * scale;
    const bool inside = std::abs(b - spec.regime_beta[l]) <= 1.96 * se;
    ok = ok && inside && !f.skipped;
    detail += fmt("%s beta %.5f [%.5f, %.5f] n=%zu %s; ",
                  std::string(regime::to_string(static_cast<regime::Label>(l))).c_str(), b, b - 1.96 * se,
                  b + 1.96 * se, f.n, inside ? "covers" : "MISSES");
  }
  const double ratio = reg.fits[2].beta / reg.fits[0].beta;
  ok = ok && ratio >= 6.0 && ratio <= 12.0 && secs < 120.0;
  detail += fmt("crisis/bull %.2f (window [6,12]), runtime %.1fs", ratio, secs);
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// Asymmetry sign recovery and Wald size

Outcome asymmetry_recovery() {
  const auto start = Clock::now();
  RunConfig cfg;
  int signs = 0;
  const int runs = 100;
  for (int r = 0; r < runs; ++r) {
    synth::SynthSpec spec;
    spec.n_stocks = 60;
    spec.n_days = 750;
    spec.seed = 5000 + r;
    const auto run = simulate(spec, cfg);
    const auto rows = pipeline::asymmetry_table(run.data, cfg);
    const auto& foreign = rows[index(InvestorType::Foreign)];
    const auto& individual = rows[index(InvestorType::Individual)];
    signs += foreign.ratio_defined && individual.ratio_defined && foreign.ratio < 0.0 && individual.ratio < 1.0;
  }

  // Size under the null. The generator's measurement noise scales with
  // volatility, which peaks on shock days, so the verdict uses the
  // heteroskedasticity-robust covariance; the conventional rate is reported
  // alongside.
  RunConfig robust = cfg;
  robust.asymmetry.errors = AsymmetryConfig::Errors::Robust;
  int rejections = 0, conventional = 0, tests = 0;
  const int null_runs = 300;
  for (int r = 0; r < null_runs; ++r) {
    synth::SynthSpec spec;
    spec.n_stocks = 30;
    spec.n_days = 500;
    spec.seed = 7000 + r;
    for (std::size_t j = 0; j < kNumInvestorTypes; ++j) spec.beta_minus[j] = spec.beta_plus[j];
    const auto run = simulate(spec, cfg);
    const auto hc = pipeline::asymmetry_table(run.data, robust);
    const auto ols = pipeline::asymmetry_table(run.data, cfg);
    for (std::size_t j = 0; j < hc.size(); ++j) {
      if (hc[j].partial) continue;
      ++tests;
      rejections += hc[j].p_value < 0.05;
      conventional += ols[j].p_value < 0.05;
    }
  }
  const double share = static_cast<double>(signs) / runs;
  const double size = tests ? static_cast<double>(rejections) / tests : 0.0;
  const double size_ols = tests ? static_cast<double>(conventional) / tests : 0.0;
  return {share >= 0.95 && size >= 0.02 && size <= 0.09,
          fmt("sign pattern in %d/%d runs (need >= 95%%); robust Wald rejection %.1f%% of %d null tests (window "
              "2-9%%; conventional errors %.1f%%), runtime %.1fs",
              signs, runs, 100 * size, tests, 100 * size_ols, seconds_since(start))};
}

// ---------------------------------------------------------------------------
// Value of filtering

Outcome filter_value() {
  const auto start = Clock::now();
  RunConfig cfg;
  // The t comparison is noisy on small panels: both statistics move with
  // the common regime path. 200 x 1200 keeps the expected gap well above
  // that noise while staying inside a few minutes on one core.
  const int runs = 20;
  int mse_wins = 0, t_wins = 0;
  double mse_ratio_sum = 0.0;
  for (int r = 0; r < runs; ++r) {
    synth::SynthSpec spec;
    spec.n_stocks = 200;
    spec.n_days = 1200;
    spec.seed = 9000 + r;
    const auto run = simulate(spec, cfg);
    const auto filters = pipeline::run_filters(run.data.stocks, cfg);
    const auto cal = calendar(run.gen.truth.dates);
    const auto j = index(InvestorType::Foreign);
    double raw = 0.0, filt = 0.0;
    for (std::size_t i = 0; i < run.data.stocks.size(); ++i) {
      const auto& s = run.data.stocks[i];
      const auto& theta = run.gen.truth.theta[stock_number(s.stock_id)][j];
      const auto& xhat = filters.stocks[i][j].output.filtered;
      for (std::size_t t = 0; t < s.size(); ++t) {
        const double th = theta[cal.at(s.dates[t])];
        raw += (s.flow[j][t] - th) * (s.flow[j][t] - th);
        filt += (xhat[t] - th) * (xhat[t] - th);
      }
    }
    mse_wins += filt < raw;
    mse_ratio_sum += filt / raw;
    const auto row = econ::predictive_row(InvestorType::Foreign, 1,
                                          pipeline::signal_series(run.data.stocks, nullptr, InvestorType::Foreign),
                                          pipeline::signal_series(run.data.stocks, &filters, InvestorType::Foreign));
    t_wins += row.t_filtered >= row.t_raw;
  }
  return {mse_wins >= 0.95 * runs && t_wins >= 0.80 * runs,
          fmt("filtered MSE < raw in %d/%d runs (mean ratio %.3f); filtered t >= raw t in %d/%d runs, runtime %.1fs",
              mse_wins, runs, mse_ratio_sum / runs, t_wins, runs, seconds_since(start))};
}

// ---------------------------------------------------------------------------
// Backtest correctness

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

ValidatedPanel truncate(const synth::Generated& gen, Date last) {
  std::vector<PanelObservation> rows;
  for (const auto& r : gen.rows)
    if (r.date <= last) rows.push_back(r);
  return validate_panel(std::move(rows));
}

Outcome backtest_correctness() {
  const auto start = Clock::now();
  // Hand fixture. Equity 1.01, 0.9898, 1.019494, 1.00929906; the only
  // drawdown that matters is 1.01 -> 0.9898, i.e. 2%.
  const std::vector<double> fixture{0.01, -0.02, 0.03, -0.01};
  const auto m = backtest::compute_metrics(fixture, 252.0);
  const double total = 1.01 * 0.98 * 1.03 * 0.99 - 1.0;
  const double sd = std::sqrt((0.0075 * 0.0075 + 0.0225 * 0.0225 + 0.0275 * 0.0275 + 0.0125 * 0.0125) / 3.0);
  const double sharpe = 0.0025 / sd * std::sqrt(252.0);
  const double annual = std::pow(1.0 + total, 252.0 / 4.0) - 1.0;
  const double tol = 1e-12;
  const bool hand = std::abs(m.max_drawdown - 0.02) <= tol && std::abs(m.total_return - total) <= tol &&
                    std::abs(m.sharpe - sharpe) <= tol && std::abs(m.volatility - sd * std::sqrt(252.0)) <= tol &&
                    std::abs(m.annualized_return - annual) <= tol * 100 &&
                    std::abs(m.calmar - annual / 0.02) <= tol * 1e4;

  // No lookahead: positions up to date d must not change when later data
  // is removed.
  RunConfig cfg;
  cfg.kalman.estimate = true;
  int truncations = 0, violations = 0;
  std::mt19937_64 pick(606);
  for (int r = 0; r < 4; ++r) {
    synth::SynthSpec spec;
    spec.n_stocks = 30;
    spec.n_days = 420;
    spec.seed = 6000 + r;
    const auto gen = synth::generate_panel(spec);
    const auto full = pipeline::run_backtest(validate_panel(gen.rows), cfg);
    std::uniform_int_distribution<int> cut(cfg.backtest.train_days + 20, spec.n_days - 2);
    const int d = cut(pick);
    const auto part = pipeline::run_backtest(truncate(gen, gen.truth.dates[d]), cfg);
    ++truncations;
    bool clean = part.market.dates.size() == static_cast<std::size_t>(d + 1);
    for (std::size_t j = 0; j < kNumInvestorTypes && clean; ++j) {
      for (std::size_t v = 0; v < 3 && clean; ++v) {
        const auto& a = full.weights[j][v];
        const auto& b = part.weights[j][v];
        for (Eigen::Index t = 0; t <= d && clean; ++t)
          for (Eigen::Index i = 0; i < a.cols(); ++i) clean = clean && same(a(t, i), b(t, i));
      }
    }
    violations += !clean;
  }

  // All-Weather drawdown against Kalman Filtered on crisis-containing runs.
  RunConfig mc = cfg;
  mc.kalman.estimate = false;
  int crisis_runs = 0, aw_wins = 0;
  for (int r = 0; r < 40; ++r) {
    synth::SynthSpec spec;
    spec.n_stocks = 50;
    spec.n_days = 750;
    spec.seed = 8000 + r;
    const auto gen = synth::generate_panel(spec);
    bool crisis = false;
    for (std::size_t t = static_cast<std::size_t>(mc.backtest.train_days); t < gen.truth.regime.size(); ++t)
      crisis = crisis || gen.truth.regime[t] == 2;
    if (!crisis) continue;
    const auto run = pipeline::run_backtest(validate_panel(gen.rows), mc);
    const auto j = index(InvestorType::Foreign);
    const double kf = run.reports[j][1].metrics.max_drawdown;
    const double aw = run.reports[j][2].metrics.max_drawdown;
    ++crisis_runs;
    aw_wins += aw <= kf;
  }
  const bool dd = crisis_runs > 0 && aw_wins >= 0.70 * crisis_runs;
  return {hand && violations == 0 && dd,
          fmt("hand fixture %s (maxDD %.15f); lookahead violations %d/%d; All-Weather maxDD <= Kalman in %d/%d "
              "crisis runs (need >= 70%%), runtime %.1fs",
              hand ? "exact" : "MISMATCH", m.max_drawdown, violations, truncations, aw_wins, crisis_runs,
              seconds_since(start))};
}

// ---------------------------------------------------------------------------
// Bootstrap coverage

Outcome bootstrap_coverage() {
  const auto start = Clock::now();
  const double mu = 0.0005, sigma = 0.01;
  const double truth = mu / sigma * std::sqrt(252.0);
  const int reps = 200, n = 1000;
  int covered = 0;
  std::mt19937_64 rng(808);
  std::normal_distribution<double> z(mu, sigma);
  const econ::Statistic sharpe = [](std::span<const double> x) { return backtest::sharpe_ratio(x, 252.0); };
  for (int r = 0; r < reps; ++r) {
    std::vector<double> x(n);
    for (auto& v : x) v = z(rng);
    const auto ci = econ::bootstrap_ci("sharpe", sharpe, x, 1000, 10, 900 + r);
    covered += ci.lower <= truth && truth <= ci.upper;
  }
  const double rate = static_cast<double>(covered) / reps;
  const double secs = seconds_since(start);
  return {std::abs(rate - 0.95) <= 0.03 && secs < 120.0,
          fmt("coverage %.1f%% over %d replications of 1000 iterations (window 92-98%%), runtime %.1fs", 100 * rate,
              reps, secs)};
}

// ---------------------------------------------------------------------------
// End-to-end determinism through the CLI

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto start = Clock::now();
  const auto root = fs::temp_directory_path() / ("regimeflow_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  auto pipeline = [&](const std::string& name, int threads) {
    const auto dir = root / name;
    const std::string common = " --dir '" + dir.string() + "' --threads " + std::to_string(threads) +
                               " --set run.seed=1234 > /dev/null";
    const char* steps[] = {"simulate --stocks 40 --days 600", "ingest", "filter", "regime", "asym",
                           "predict", "backtest", "robust", "report"};
    for (const char* step : steps) {
      const std::string cmd = "'" + g_cli.string() + "' " + step + common;
      if (std::system(cmd.c_str()) != 0) return false;
    }
    return true;
  };
  const bool ran = pipeline("a", 1) && pipeline("b", 4);
  bool metrics_same = false;
  int differing = 0, compared = 0;
  if (ran) {
    metrics_same = slurp(root / "a" / "metrics.json") == slurp(root / "b" / "metrics.json") &&
                   !slurp(root / "a" / "metrics.json").empty();
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
      if (!e.is_regular_file() || e.path().filename() == "run.json") continue;
      const auto rel = fs::relative(e.path(), root / "a");
      ++compared;
      differing += slurp(e.path()) != slurp(root / "b" / rel);
    }
  }
  fs::remove_all(root);
  return {ran && metrics_same,
          fmt("pipeline %s; metrics.json %s; %d of %d artifacts differ (threads 1 vs 4), runtime %.1fs",
              ran ? "completed" : "FAILED", metrics_same ? "byte-identical" : "DIFFERS", differing, compared,
              seconds_since(start))};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <regimeflow-cli> [criterion...]\n";
    return 2;
  }
  g_cli = fs::absolute(argv[1]);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"hamilton_oracle", hamilton_oracle},   {"kalman_oracle", kalman_oracle},
      {"em_recovery", em_recovery},           {"beta_recovery", beta_recovery},
      {"asymmetry_recovery", asymmetry_recovery}, {"filter_value", filter_value},
      {"backtest_correctness", backtest_correctness}, {"bootstrap_coverage", bootstrap_coverage},
      {"determinism", determinism},
  };
  std::set<std::string> only(argv + 2, argv + argc);
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
