#include "regimeflow/regime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

namespace regimeflow::regime {

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Bull: return "Bull";
    case Label::Normal: return "Normal";
    case Label::Crisis: return "Crisis";
  }
  return "?";
}

void Model::check() const {
  for (int i = 0; i < kStates; ++i) {
    const double row = transition.row(i).sum();
    if (std::abs(row - 1.0) > 1e-10) {
      throw Error(ErrorCode::InvalidArgument, "transition row " + std::to_string(i) + " sums to " + std::to_string(row));
    }
    for (int j = 0; j < kStates; ++j) {
      if (!(transition(i, j) >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative transition probability");
    }
    if (!(sd[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "regime sd must be > 0");
  }
  std::array<int, kStates> seen{};
  for (auto l : labels) ++seen[static_cast<int>(l)];
  if (seen != std::array<int, kStates>{1, 1, 1}) {
    throw Error(ErrorCode::InvalidArgument, "labels must be a permutation of Bull/Normal/Crisis");
  }
}

int Model::index_of(Label label) const {
  for (int i = 0; i < kStates; ++i) {
    if (labels[i] == label) return i;
  }
  return -1;
}

Probs stationary_distribution(const Eigen::Matrix3d& P) {
  // Solve pi (P - I) = 0 with sum(pi) = 1 as a least-squares system.
  Eigen::Matrix<double, 4, 3> A;
  A.topRows<3>() = (P - Eigen::Matrix3d::Identity()).transpose();
  A.row(3).setOnes();
  Eigen::Vector4d b(0, 0, 0, 1);
  Eigen::Vector3d pi = A.colPivHouseholderQr().solve(b);
  Probs out{};
  double total = 0.0;
  for (int i = 0; i < kStates; ++i) {
    out[i] = std::max(0.0, pi(i));
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal_density(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

template <std::size_t N>
double log_sum_exp(const std::array<double, N>& v) {
  double m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

std::vector<int> Path::most_likely(bool smoothed_probs) const {
  const auto& probs = smoothed_probs ? smoothed : filtered;
  std::vector<int> out(probs.size());
  for (std::size_t t = 0; t < probs.size(); ++t) {
    out[t] = static_cast<int>(std::max_element(probs[t].begin(), probs[t].end()) - probs[t].begin());
  }
  return out;
}

std::vector<std::uint8_t> Path::crisis_flags(const Model& m, double threshold) const {
  const int c = m.index_of(Label::Crisis);
  std::vector<std::uint8_t> out(filtered.size());
  for (std::size_t t = 0; t < filtered.size(); ++t) out[t] = filtered[t][c] > threshold ? 1 : 0;
  return out;
}

Path hamilton_filter(std::span<const double> returns, const Model& model) {
  model.check();
  const std::size_t n = returns.size();
  Path path;
  path.predicted.resize(n);
  path.filtered.resize(n);

  std::array<std::array<double, kStates>, kStates> logP{};
  for (int i = 0; i < kStates; ++i)
    for (int j = 0; j < kStates; ++j) logP[i][j] = safe_log(model.transition(i, j));

  std::array<double, kStates> log_prev{};
  for (int i = 0; i < kStates; ++i) log_prev[i] = safe_log(model.initial[i]);

  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(returns[t])) throw Error(ErrorCode::NonFiniteInput, "non-finite return at t=" + std::to_string(t));
    std::array<double, kStates> log_pred{};
    if (t == 0) {
      log_pred = log_prev;
    } else {
      for (int j = 0; j < kStates; ++j) {
        std::array<double, kStates> terms{};
        for (int i = 0; i < kStates; ++i) terms[i] = log_prev[i] + logP[i][j];
        log_pred[j] = log_sum_exp(terms);
      }
    }
    std::array<double, kStates> log_joint{};
    for (int j = 0; j < kStates; ++j) {
      log_joint[j] = log_pred[j] + log_normal_density(returns[t], model.mean[j], model.sd[j]);
    }
    const double log_marginal = log_sum_exp(log_joint);
    if (!std::isfinite(log_marginal)) {
      throw Error(ErrorCode::ZeroLikelihood, "all regime densities vanish at t=" + std::to_string(t));
    }
    path.log_likelihood += log_marginal;
    const double pred_norm = log_sum_exp(log_pred);
    for (int j = 0; j < kStates; ++j) {
      log_prev[j] = log_joint[j] - log_marginal;
      path.filtered[t][j] = std::exp(log_prev[j]);
      path.predicted[t][j] = std::exp(log_pred[j] - pred_norm);
    }
  }
  return path;
}

std::vector<Probs> kim_smoother(const Path& path, const Model& model) {
  const std::size_t n = path.size();
  std::vector<Probs> smoothed(n);
  if (n == 0) return smoothed;
  smoothed[n - 1] = path.filtered[n - 1];
  for (std::size_t t = n - 1; t-- > 0;) {
    Probs ratio{};
    for (int j = 0; j < kStates; ++j) {
      ratio[j] = path.predicted[t + 1][j] > 0.0 ? smoothed[t + 1][j] / path.predicted[t + 1][j] : 0.0;
    }
    double total = 0.0;
    for (int i = 0; i < kStates; ++i) {
      double acc = 0.0;
      for (int j = 0; j < kStates; ++j) acc += model.transition(i, j) * ratio[j];
      smoothed[t][i] = path.filtered[t][i] * acc;
      total += smoothed[t][i];
    }
    for (auto& v : smoothed[t]) v /= total;
  }
  return smoothed;
}

LabelMap label_regimes(const Model& model) {
  LabelMap map;
  // Crisis: largest sd; strict comparison keeps the lowest index on exact ties.
  int crisis = 0;
  for (int i = 1; i < kStates; ++i) {
    if (model.sd[i] > model.sd[crisis]) crisis = i;
  }
  for (int i = 0; i < kStates; ++i) {
    if (i != crisis && std::abs(model.sd[i] - model.sd[crisis]) <= 1e-10) map.tie_break = true;
  }
  std::array<int, 2> rest{};
  int k = 0;
  for (int i = 0; i < kStates; ++i) {
    if (i != crisis) rest[k++] = i;
  }
  int bull = model.mean[rest[1]] > model.mean[rest[0]] ? rest[1] : rest[0];
  if (std::abs(model.mean[rest[0]] - model.mean[rest[1]]) <= 1e-10) map.tie_break = true;
  int normal = bull == rest[0] ? rest[1] : rest[0];
  map.labels[bull] = Label::Bull;
  map.labels[normal] = Label::Normal;
  map.labels[crisis] = Label::Crisis;
  return map;
}

Model canonical_order(const Model& model) {
  std::array<int, kStates> src{};
  for (int i = 0; i < kStates; ++i) src[static_cast<int>(model.labels[i])] = i;
  Model out = model;
  for (int a = 0; a < kStates; ++a) {
    out.mean[a] = model.mean[src[a]];
    out.sd[a] = model.sd[src[a]];
    out.initial[a] = model.initial[src[a]];
    out.labels[a] = static_cast<Label>(a);
    for (int b = 0; b < kStates; ++b) out.transition(a, b) = model.transition(src[a], src[b]);
  }
  return out;
}

double separation(const Model& model) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kStates; ++i) {
    for (int j = i + 1; j < kStates; ++j) {
      const double avg = 0.5 * (model.sd[i] + model.sd[j]);
      const double dm = (model.mean[i] - model.mean[j]) / avg;
      const double ds = std::log(model.sd[i] / model.sd[j]);
      best = std::min(best, std::sqrt(dm * dm + ds * ds));
    }
  }
  return best;
}

Model initial_model(std::span<const double> returns) {
  std::vector<double> sorted(returns.begin(), returns.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  Model m;
  for (int s = 0; s < kStates; ++s) {
    const std::size_t lo = n * static_cast<std::size_t>(s) / kStates;
    const std::size_t hi = n * static_cast<std::size_t>(s + 1) / kStates;
    double mean = 0.0;
    for (std::size_t i = lo; i < hi; ++i) mean += sorted[i];
    mean /= static_cast<double>(hi - lo);
    double var = 0.0;
    for (std::size_t i = lo; i < hi; ++i) var += (sorted[i] - mean) * (sorted[i] - mean);
    var /= static_cast<double>(std::max<std::size_t>(hi - lo - 1, 1));
    m.mean[s] = mean;
    m.sd[s] = std::sqrt(var);
  }
  m.transition.setConstant(0.05);
  m.transition.diagonal().setConstant(0.9);
  m.initial = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  return m;
}

namespace {

struct EmOutcome {
  Model model;
  bool degenerate = false;
};

EmOutcome run_em(std::span<const double> returns, Model m, const EmOptions& options) {
  const std::size_t n = returns.size();
  m.loglik_trace.clear();
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // E-step.
    Path path = hamilton_filter(returns, m);
    const auto smoothed = kim_smoother(path, m);
    m.loglik_trace.push_back(path.log_likelihood);
    m.log_likelihood = path.log_likelihood;
    m.iterations = iter;
    if (iter > 0 && path.log_likelihood - prev_ll < options.tolerance) {
      m.converged = true;
      break;
    }
    prev_ll = path.log_likelihood;

    // Expected transition counts from two-slice marginals.
    Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();
    for (std::size_t t = 0; t + 1 < n; ++t) {
      for (int j = 0; j < kStates; ++j) {
        const double pred = path.predicted[t + 1][j];
        if (pred <= 0.0) continue;
        const double r = smoothed[t + 1][j] / pred;
        for (int i = 0; i < kStates; ++i) counts(i, j) += path.filtered[t][i] * m.transition(i, j) * r;
      }
    }
    // M-step.
    Model next = m;
    for (int i = 0; i < kStates; ++i) {
      const double row = counts.row(i).sum();
      if (row > 0.0) {
        next.transition.row(i) = counts.row(i) / row;
      }
      double w = 0.0, wr = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        w += smoothed[t][i];
        wr += smoothed[t][i] * returns[t];
      }
      if (!(w > 0.0)) return {m, true};
      const double mu = wr / w;
      double wv = 0.0;
      for (std::size_t t = 0; t < n; ++t) wv += smoothed[t][i] * (returns[t] - mu) * (returns[t] - mu);
      const double sd = std::sqrt(wv / w);
      if (!(sd >= options.sd_floor)) return {m, true};
      next.mean[i] = mu;
      next.sd[i] = sd;
      next.initial[i] = smoothed[0][i];
    }
    // Renormalize rows against rounding drift.
    for (int i = 0; i < kStates; ++i) next.transition.row(i) /= next.transition.row(i).sum();
    m = std::move(next);
  }
  if (!m.converged) {
    // Final likelihood at the last M-step parameters.
    Path path = hamilton_filter(returns, m);
    m.loglik_trace.push_back(path.log_likelihood);
    m.log_likelihood = path.log_likelihood;
    m.iterations = options.max_iterations;
    m.converged = m.loglik_trace.size() >= 2 &&
                  m.loglik_trace.back() - m.loglik_trace[m.loglik_trace.size() - 2] < options.tolerance;
  }
  return {m, false};
}

}  // namespace

Model fit_em(std::span<const double> returns, const EmOptions& options) {
  if (returns.size() < 3) throw Error(ErrorCode::SeriesTooShort, "fit_em needs at least three returns");
  Model start = initial_model(returns);
  std::mt19937_64 rng(0x5eed);
  for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
    Model init = start;
    if (attempt > 0) {
      std::normal_distribution<double> jitter(0.0, 1.0);
      for (int s = 0; s < kStates; ++s) {
        init.mean[s] += 0.25 * start.sd[s] * jitter(rng);
        init.sd[s] = std::max(start.sd[s] * std::exp(0.25 * jitter(rng)), 10 * options.sd_floor);
      }
    }
    auto outcome = run_em(returns, init, options);
    if (outcome.degenerate) continue;
    Model m = std::move(outcome.model);
    m.restarts = attempt;
    const auto map = label_regimes(m);
    m.labels = map.labels;
    m.tie_break = map.tie_break;
    m = canonical_order(m);
    m.separation = separation(m);
    m.merged = m.separation < kMergeThreshold;
    return m;
  }
  throw Error(ErrorCode::DegenerateRegime, "regime volatility collapsed below floor after " +
                                               std::to_string(options.max_restarts) + " restarts");
}

RegimeRegression regime_conditional_regression(const std::vector<econ::SignalSeries>& stocks,
                                               const std::vector<Date>& market_dates,
                                               const std::vector<int>& state, const Model& model) {
  if (market_dates.size() != state.size()) {
    throw Error(ErrorCode::LengthMismatch, "regime state vector not aligned to market dates");
  }
  std::map<Date, std::size_t> position;
  for (std::size_t i = 0; i < market_dates.size(); ++i) position.emplace(market_dates[i], i);

  std::array<econ::CrossProducts, kStates> acc{econ::CrossProducts(2), econ::CrossProducts(2),
                                               econ::CrossProducts(2)};
  for (const auto& s : stocks) {
    for (std::size_t t = 0; t + 1 < s.dates.size(); ++t) {
      auto it = position.find(s.dates[t]);
      if (it == position.end()) continue;
      // Require the next observation to be the next market day.
      const std::size_t m = it->second;
      if (m + 1 >= market_dates.size() || market_dates[m + 1] != s.dates[t + 1]) continue;
      const double x = s.signal[t];
      const double y = s.returns[t + 1];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      const double row[2] = {1.0, x};
      acc[static_cast<std::size_t>(model.labels[state[m]])].add(row, y);
    }
  }

  RegimeRegression out;
  for (int l = 0; l < kStates; ++l) {
    auto& fit = out.fits[l];
    fit.label = static_cast<Label>(l);
    fit.n = acc[l].n();
    out.usable += fit.n;
    if (fit.n < kMinRegimeSample) {
      fit.skipped = true;
      fit.alpha = fit.beta = fit.se_beta = fit.t_beta = fit.r2 = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    try {
      const auto ols = acc[l].solve();
      fit.alpha = ols.coef(0);
      fit.beta = ols.coef(1);
      fit.se_beta = ols.se(1);
      fit.t_beta = ols.t(1);
      fit.r2 = ols.r2;
    } catch (const Error&) {
      fit.skipped = true;
      fit.alpha = fit.beta = fit.se_beta = fit.t_beta = fit.r2 = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

}  // namespace regimeflow::regime
