#include "regimeflow/econometrics.hpp"

#include <gsl/gsl_cdf.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "regimeflow/ingest.hpp"
#include "regimeflow/parallel.hpp"

namespace regimeflow::econ {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double centered_tss(const Eigen::VectorXd& y) {
  const double mean = y.mean();
  return (y.array() - mean).square().sum();
}

}  // namespace

OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, Covariance cov, std::span<const std::int64_t> groups) {
  const auto n = X.rows();
  const auto k = X.cols();
  if (y.size() != n) throw Error(ErrorCode::LengthMismatch, "y and X row counts differ");
  if (n <= k) throw Error(ErrorCode::InvalidArgument, "OLS needs more observations than regressors");
  if (!y.allFinite() || !X.allFinite()) throw Error(ErrorCode::NonFiniteInput, "OLS input contains NaN or inf");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < k) {
    throw Error(ErrorCode::RankDeficient,
                "design matrix rank " + std::to_string(qr.rank()) + " < " + std::to_string(k));
  }
  OlsFit fit;
  fit.n = static_cast<std::size_t>(n);
  fit.coef = qr.solve(y);
  fit.residuals = y - X * fit.coef;
  const double rss = fit.residuals.squaredNorm();
  fit.residual_variance = rss / static_cast<double>(n - k);
  const double tss = centered_tss(y);
  fit.r2 = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 1.0;

  // (X'X)^{-1} = P R^{-1} R^{-T} P'
  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const auto& P = qr.colsPermutation();
  const Eigen::MatrixXd bread = P * (Rinv * Rinv.transpose()) * P.transpose();

  switch (cov) {
    case Covariance::Conventional:
      fit.cov = fit.residual_variance * bread;
      break;
    case Covariance::Robust: {
      Eigen::MatrixXd meat = X.transpose() * fit.residuals.array().square().matrix().asDiagonal() * X;
      fit.cov = bread * meat * bread * (static_cast<double>(n) / static_cast<double>(n - k));
      break;
    }
    case Covariance::ClusteredByGroup: {
      if (static_cast<Eigen::Index>(groups.size()) != n) {
        throw Error(ErrorCode::LengthMismatch, "cluster groups must match the number of rows");
      }
      std::map<std::int64_t, Eigen::VectorXd> scores;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, inserted] = scores.try_emplace(groups[i], Eigen::VectorXd::Zero(k));
        it->second += X.row(i).transpose() * fit.residuals(i);
      }
      Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
      for (const auto& [g, s] : scores) meat += s * s.transpose();
      const double G = static_cast<double>(scores.size());
      const double scale = G > 1 ? (G / (G - 1.0)) * (static_cast<double>(n - 1) / static_cast<double>(n - k)) : 1.0;
      fit.cov = bread * meat * bread * scale;
      break;
    }
  }
  fit.se = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.t = fit.coef.cwiseQuotient(fit.se);
  return fit;
}

void CrossProducts::add(std::span<const double> x, double y) {
  const auto k = xty_.size();
  for (Eigen::Index i = 0; i < k; ++i) {
    xty_(i) += x[i] * y;
    for (Eigen::Index j = 0; j <= i; ++j) xtx_(i, j) += x[i] * x[j];
  }
  yty_ += y * y;
  ysum_ += y;
  ++n_;
}

OlsFit CrossProducts::solve() const {
  const auto k = xty_.size();
  if (n_ <= static_cast<std::size_t>(k)) throw Error(ErrorCode::RankDeficient, "not enough observations");
  Eigen::MatrixXd xtx = xtx_.selfadjointView<Eigen::Lower>();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
  qr.setThreshold(1e-13);
  if (qr.rank() < k) throw Error(ErrorCode::RankDeficient, "cross-product matrix is singular");
  OlsFit fit;
  fit.n = n_;
  fit.coef = qr.solve(xty_);
  const Eigen::MatrixXd inv = qr.inverse();
  const double rss = std::max(0.0, yty_ - 2.0 * fit.coef.dot(xty_) + fit.coef.dot(xtx * fit.coef));
  fit.residual_variance = rss / static_cast<double>(n_ - static_cast<std::size_t>(k));
  const double n = static_cast<double>(n_);
  const double tss = yty_ - ysum_ * ysum_ / n;
  fit.r2 = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 1.0;
  fit.cov = fit.residual_variance * inv;
  fit.se = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.t = fit.coef.cwiseQuotient(fit.se);
  return fit;
}

double forward_return(std::span<const double> returns, std::size_t t, int horizon) {
  if (horizon < 1 || t + static_cast<std::size_t>(horizon) >= returns.size()) return kNaN;
  double growth = 1.0;
  for (int j = 1; j <= horizon; ++j) growth *= 1.0 + returns[t + static_cast<std::size_t>(j)];
  return growth - 1.0;
}

PredictiveRow predictive_row(InvestorType investor, int horizon, const std::vector<SignalSeries>& raw,
                             const std::vector<SignalSeries>& filtered) {
  if (raw.size() != filtered.size()) throw Error(ErrorCode::LengthMismatch, "raw and filtered panels differ");
  CrossProducts acc_raw(2), acc_filt(2);
  for (std::size_t s = 0; s < raw.size(); ++s) {
    const auto& a = raw[s];
    const auto& b = filtered[s];
    if (a.signal.size() != b.signal.size() || a.returns.size() != a.signal.size()) {
      throw Error(ErrorCode::LengthMismatch, "raw and filtered series lengths differ");
    }
    for (std::size_t t = 0; t < a.signal.size(); ++t) {
      const double y = forward_return(a.returns, t, horizon);
      if (!std::isfinite(y) || !std::isfinite(a.signal[t]) || !std::isfinite(b.signal[t])) continue;
      const double xr[2] = {1.0, a.signal[t]};
      const double xf[2] = {1.0, b.signal[t]};
      acc_raw.add(xr, y);
      acc_filt.add(xf, y);
    }
  }
  PredictiveRow row;
  row.investor = investor;
  row.horizon = horizon;
  const auto fr = acc_raw.solve();
  const auto ff = acc_filt.solve();
  row.n = fr.n;
  row.t_raw = fr.t(1);
  row.t_filtered = ff.t(1);
  row.r2_raw = fr.r2;
  row.r2_filtered = ff.r2;
  row.beta_raw = fr.coef(1);
  row.beta_filtered = ff.coef(1);
  row.improvement = row.t_raw != 0.0 ? (row.t_filtered - row.t_raw) / std::abs(row.t_raw) : 0.0;
  return row;
}

ShockIndicators shock_indicators(std::span<const double> returns, std::span<const double> sigma, double k) {
  if (returns.size() != sigma.size()) throw Error(ErrorCode::LengthMismatch, "returns and sigma lengths differ");
  if (!(k > 0.0)) throw Error(ErrorCode::InvalidArgument, "shock multiple k must be > 0");
  const std::size_t n = returns.size();
  ShockIndicators out;
  out.positive.assign(n, 0);
  out.negative.assign(n, 0);
  out.magnitude.assign(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    const double r = returns[t - 1];
    const double s = sigma[t - 1];
    out.magnitude[t] = std::abs(r);
    if (!(s > 0.0)) continue;  // no volatility history yet
    if (r > k * s) out.positive[t] = 1;
    else if (r < -k * s) out.negative[t] = 1;
  }
  return out;
}

AsymmetryRow asymmetry_fit(InvestorType investor, const FlowPanel& panel, const ShockIndicators& shocks,
                           double return_scale, bool level_mode, Covariance cov) {
  if (panel.date_index.size() != panel.flow.size()) {
    throw Error(ErrorCode::LengthMismatch, "flow panel date index and flow counts differ");
  }
  AsymmetryRow row;
  row.investor = investor;
  const std::size_t ncal = shocks.positive.size();
  const bool per_stock = !panel.stock_shocks.empty();
  if (per_stock && panel.stock_shocks.size() != panel.flow.size()) {
    throw Error(ErrorCode::LengthMismatch, "per-stock shock indicators do not match the flow panel");
  }
  if (per_stock) {
    for (std::size_t s = 0; s < panel.flow.size(); ++s) {
      const auto& sh = panel.stock_shocks[s];
      if (sh.positive.size() != panel.flow[s].size()) {
        throw Error(ErrorCode::LengthMismatch, "per-stock shock indicators do not match the flow panel");
      }
      for (std::size_t t = 0; t < sh.positive.size(); ++t) {
        row.positive_shocks += sh.positive[t];
        row.negative_shocks += sh.negative[t];
      }
    }
  } else {
    for (std::size_t m = 0; m < ncal; ++m) {
      row.positive_shocks += shocks.positive[m];
      row.negative_shocks += shocks.negative[m];
    }
  }
  // Columns actually present: intercept, [b+], [b-].
  const bool use_plus = row.positive_shocks > 0;
  const bool use_minus = row.negative_shocks > 0;
  row.partial = !(use_plus && use_minus);
  const int k = 1 + (use_plus ? 1 : 0) + (use_minus ? 1 : 0);

  struct Obs {
    double y, xp, xm;
    std::int64_t group;
  };
  std::vector<Obs> obs;
  CrossProducts acc(k);
  const bool stream = cov == Covariance::Conventional;
  for (std::size_t s = 0; s < panel.flow.size(); ++s) {
    const auto& idx = panel.date_index[s];
    const auto& f = panel.flow[s];
    for (std::size_t t = level_mode ? 0 : 1; t < f.size(); ++t) {
      const std::size_t m = idx[t];
      if (!per_stock && m >= ncal) throw Error(ErrorCode::InvalidArgument, "date index outside the market calendar");
      if (!level_mode && idx[t - 1] + 1 != m) continue;  // dS needs consecutive market days
      const double y = level_mode ? f[t] : f[t] - f[t - 1];
      const auto& sh = per_stock ? panel.stock_shocks[s] : shocks;
      const std::size_t at = per_stock ? t : m;
      const double mag = sh.magnitude[at] * return_scale;
      const double xp = sh.positive[at] ? mag : 0.0;
      const double xm = sh.negative[at] ? mag : 0.0;
      if (!std::isfinite(y)) continue;
      if (stream) {
        double x[3];
        int c = 0;
        x[c++] = 1.0;
        if (use_plus) x[c++] = xp;
        if (use_minus) x[c++] = xm;
        acc.add(std::span<const double>(x, static_cast<std::size_t>(c)), y);
      } else {
        obs.push_back({y, xp, xm, static_cast<std::int64_t>(m)});
      }
    }
  }

  OlsFit fit;
  if (stream) {
    fit = acc.solve();
  } else {
    Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size()));
    Eigen::MatrixXd X(static_cast<Eigen::Index>(obs.size()), k);
    std::vector<std::int64_t> groups(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      y(r) = obs[i].y;
      int c = 0;
      X(r, c++) = 1.0;
      if (use_plus) X(r, c++) = obs[i].xp;
      if (use_minus) X(r, c++) = obs[i].xm;
      groups[i] = obs[i].group;
    }
    fit = ols(y, X, cov, groups);
  }
  row.n = fit.n;
  row.alpha = fit.coef(0);
  int c = 1;
  int ip = -1, im = -1;
  if (use_plus) ip = c++;
  if (use_minus) im = c++;
  row.beta_plus = ip > 0 ? fit.coef(ip) : kNaN;
  row.se_plus = ip > 0 ? fit.se(ip) : kNaN;
  row.t_plus = ip > 0 ? fit.t(ip) : kNaN;
  row.beta_minus = im > 0 ? fit.coef(im) : kNaN;
  row.se_minus = im > 0 ? fit.se(im) : kNaN;
  row.t_minus = im > 0 ? fit.t(im) : kNaN;
  row.ratio_defined = ip > 0 && im > 0 && std::abs(row.beta_plus) > 1e-12;
  row.ratio = row.ratio_defined ? row.beta_minus / row.beta_plus : kNaN;
  if (ip > 0 && im > 0) {
    const double diff = row.beta_plus - row.beta_minus;
    const double var = fit.cov(ip, ip) + fit.cov(im, im) - 2.0 * fit.cov(ip, im);
    row.wald = var > 0.0 ? diff * diff / var : kNaN;
    row.p_value = std::isfinite(row.wald) ? chi2_1_sf(row.wald) : kNaN;
  } else {
    row.wald = kNaN;
    row.p_value = kNaN;
  }
  return row;
}

BootstrapResult bootstrap_ci(const std::string& name, const Statistic& statistic, std::span<const double> series,
                             int iterations, int block_length, std::uint64_t seed) {
  BootstrapResult res;
  res.statistic = name;
  res.iterations = iterations;
  res.block_length = block_length;
  if (iterations < 1 || block_length < 1) {
    throw Error(ErrorCode::InvalidArgument, "bootstrap needs iterations >= 1 and block length >= 1");
  }
  res.point = series.empty() ? kNaN : statistic(series);
  if (!std::isfinite(res.point)) {
    res.undefined = true;
    res.point = res.lower = res.upper = kNaN;
    return res;
  }
  const std::size_t n = series.size();
  const std::size_t L = static_cast<std::size_t>(block_length);
  std::vector<double> draws(static_cast<std::size_t>(iterations), kNaN);
  parallel_for(draws.size(), [&](std::size_t it) {
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(it), 0xB00Fu};
    std::mt19937_64 rng(ss);
    std::uniform_int_distribution<std::size_t> start(0, n - 1);
    std::vector<double> sample;
    sample.reserve(n + L);
    while (sample.size() < n) {
      const std::size_t s = start(rng);
      for (std::size_t j = 0; j < L && sample.size() < n; ++j) sample.push_back(series[(s + j) % n]);
    }
    draws[it] = statistic(sample);
  });
  std::vector<double> finite;
  finite.reserve(draws.size());
  for (double d : draws) {
    if (std::isfinite(d)) finite.push_back(d);
  }
  if (finite.empty()) {
    res.undefined = true;
    res.lower = res.upper = kNaN;
    return res;
  }
  std::sort(finite.begin(), finite.end());
  res.lower = quantile_sorted(finite, 0.025);
  res.upper = quantile_sorted(finite, 0.975);
  res.point_outside = res.point < res.lower || res.point > res.upper;
  return res;
}

double chi2_1_sf(double x) { return x <= 0.0 ? 1.0 : gsl_cdf_chisq_Q(x, 1.0); }

double two_sided_normal_p(double z) { return 2.0 * gsl_cdf_ugaussian_Q(std::abs(z)); }

}  // namespace regimeflow::econ
