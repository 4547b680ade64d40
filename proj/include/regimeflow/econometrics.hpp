#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "regimeflow/types.hpp"

namespace regimeflow::econ {

enum class Covariance { Conventional, Robust, ClusteredByGroup };

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::MatrixXd cov;
  double r2 = 0.0;
  double residual_variance = 0.0;
  std::size_t n = 0;
  Eigen::VectorXd residuals;
};

/// Least squares via column-pivoting Householder QR. Conventional
/// (homoskedastic) standard errors by default; Robust is HC1;
/// ClusteredByGroup needs `groups` (e.g. a date index per row).
/// Throws Error(RankDeficient / NonFiniteInput / InvalidArgument).
OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, Covariance cov = Covariance::Conventional,
           std::span<const std::int64_t> groups = {});

/// Streaming accumulator of X'X, X'y, y'y for OLS over very long pooled
/// panels. Produces the same estimates as `ols` with conventional errors.
class CrossProducts {
 public:
  explicit CrossProducts(int k) : xtx_(Eigen::MatrixXd::Zero(k, k)), xty_(Eigen::VectorXd::Zero(k)) {}

  void add(std::span<const double> x, double y);
  std::size_t n() const { return n_; }
  int k() const { return static_cast<int>(xty_.size()); }
  /// Throws Error(RankDeficient) when X'X is singular or n <= k.
  OlsFit solve() const;

 private:
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  double yty_ = 0.0;
  double ysum_ = 0.0;
  std::size_t n_ = 0;
};

/// Aligned panel of one regressor per stock with its forward returns.
struct SignalSeries {
  std::vector<Date> dates;
  std::vector<double> signal;
  std::vector<double> returns;  // close-to-close return on dates[t]
};

struct PredictiveRow {
  InvestorType investor;
  int horizon = 1;
  double t_raw = 0.0, t_filtered = 0.0;
  double r2_raw = 0.0, r2_filtered = 0.0;
  double beta_raw = 0.0, beta_filtered = 0.0;
  std::size_t n = 0;
  /// (t_filtered - t_raw) / |t_raw|
  double improvement = 0.0;
};

/// Compounded return over dates t+1..t+h of one stock series; NaN when the
/// window runs past the end.
double forward_return(std::span<const double> returns, std::size_t t, int horizon);

/// Pooled r_{t+h} = a + b S_t regressions for raw and filtered signals.
/// raw[s] and filtered[s] share dates and returns.
PredictiveRow predictive_row(InvestorType investor, int horizon, const std::vector<SignalSeries>& raw,
                             const std::vector<SignalSeries>& filtered);

struct ShockIndicators {
  std::vector<std::uint8_t> positive;  // r_{t-1} > k sigma_{t-1}
  std::vector<std::uint8_t> negative;  // r_{t-1} < -k sigma_{t-1}
  std::vector<double> magnitude;       // |r_{t-1}| (0 at t = 0)
};

/// Indicators at t built from r_{t-1} and the causal sigma_{t-1} (which itself
/// uses returns through t-2). Entry 0 carries no shock.
ShockIndicators shock_indicators(std::span<const double> returns, std::span<const double> sigma, double k);

struct AsymmetryRow {
  InvestorType investor;
  double alpha = 0.0;
  double beta_plus = 0.0, beta_minus = 0.0;
  double t_plus = 0.0, t_minus = 0.0;
  double se_plus = 0.0, se_minus = 0.0;
  double ratio = 0.0;  // NaN when |beta_plus| <= 1e-12
  bool ratio_defined = false;
  double wald = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t positive_shocks = 0, negative_shocks = 0;
  /// One of the indicators never fired; the fit drops that term.
  bool partial = false;
};

/// Flow panel for one investor type: per stock, flows and their positions
/// on the market calendar.
struct FlowPanel {
  std::vector<std::vector<std::size_t>> date_index;  // per stock, index into the market calendar
  std::vector<std::vector<double>> flow;             // per stock
  /// Optional per-stock indicators keyed by the stock's own observation
  /// index; when present they replace the market-level `shocks`.
  std::vector<ShockIndicators> stock_shocks;
};

/// Pooled asymmetric-response regression
///   dS_t = a + b+ 1[r_{t-1} > k s] |r_{t-1}| c + b- 1[r_{t-1} < -k s] |r_{t-1}| c + e
/// with c = return_scale. dS needs consecutive market days for a stock.
/// Wald test of b+ = b- uses the coefficient covariance (chi-square, 1 dof).
AsymmetryRow asymmetry_fit(InvestorType investor, const FlowPanel& panel, const ShockIndicators& shocks,
                           double return_scale, bool level_mode = false,
                           Covariance cov = Covariance::Conventional);

struct BootstrapResult {
  std::string statistic;
  double point = 0.0;
  double lower = 0.0, upper = 0.0;
  int iterations = 0;
  int block_length = 0;
  /// Statistic undefined on the sample (e.g. zero variance); all fields NaN.
  bool undefined = false;
  /// Point estimate outside its own interval (resampling noise).
  bool point_outside = false;
};

using Statistic = std::function<double(std::span<const double>)>;

/// Circular block bootstrap with percentile 2.5/97.5 interval. Each
/// iteration draws from its own stream seeded by (seed, iteration), so the
/// result does not depend on thread count.
BootstrapResult bootstrap_ci(const std::string& name, const Statistic& statistic, std::span<const double> series,
                             int iterations, int block_length, std::uint64_t seed);

/// Chi-square(1) upper tail.
double chi2_1_sf(double x);
/// Two-sided normal p-value for a z/t statistic.
double two_sided_normal_p(double z);

}  // namespace regimeflow::econ
