#pragma once

#include <span>
#include <vector>

#include "regimeflow/types.hpp"

namespace regimeflow::kalman {

/// Scalar local-level model with AR(1) state:
///   theta_t = phi * theta_{t-1} + eta_t,  eta ~ N(0, Q)
///   S_t     = theta_t + eps_t,            eps ~ N(0, R_t)
///   R_t     = R0 * (sigma_t / sigma_bar_t)^gamma
struct Params {
  double phi = 0.95;
  double state_noise = 1e-8;        // Q
  double measurement_noise = 1e-6;  // R0
  double gamma = 1.0;

  /// Throws Error(InvalidArgument) when outside phi in (0,1), Q > 0, R0 > 0, gamma >= 0.
  void check() const;
  double stationary_variance() const { return state_noise / (1.0 - phi * phi); }
};

/// Ratio floor applied when sigma_t == 0 and gamma > 0.
inline constexpr double kVolFloor = 1e-6;

struct State {
  double mean = 0.0;            // posterior theta_hat
  double variance = 0.0;        // P_{t|t}
  double gain = 0.0;            // K_t
  double measurement_var = 0.0; // R_t
  double predicted_var = 0.0;   // P_{t|t-1}
};

/// State at t = 0 before any observation: mean 0, stationary variance.
State initial_state(const Params& p);

/// R0 * (sigma / sigma_bar)^gamma, floored at R0 * kVolFloor when sigma == 0
/// and gamma > 0. Throws Error(NonPositiveBaseline) if sigma_bar <= 0.
double measurement_variance(const Params& p, double sigma, double sigma_bar);

/// One predict/update cycle. Throws Error(NonFiniteInput) on NaN/inf input.
State step(const State& prior, const Params& p, double observation, double measurement_var);

struct Output {
  std::vector<double> filtered;
  std::vector<double> gain;
  std::vector<double> measurement_var;
  std::vector<double> predicted_var;
  std::vector<double> posterior_var;
  /// One-step-ahead prediction errors and their variances (for the likelihood).
  std::vector<double> innovation;
  std::vector<double> innovation_var;
  double log_likelihood = 0.0;

  std::size_t size() const { return filtered.size(); }
};

/// Causal filter over the whole series. Where sigma_bar_t <= 0 (no volatility
/// history yet) R_t falls back to R0. Throws Error(LengthMismatch).
Output filter_series(std::span<const double> observations, std::span<const double> sigma,
                     std::span<const double> sigma_bar, const Params& p);

/// Gaussian prediction-error log-likelihood of the series under p.
double log_likelihood(std::span<const double> observations, std::span<const double> sigma,
                      std::span<const double> sigma_bar, const Params& p);

/// Fixed point of the predicted-variance Riccati recursion for constant R:
///   P = phi^2 * P * R / (P + R) + Q. Returns P_{t|t-1}.
double steady_state_predicted_variance(double phi, double Q, double R);
double steady_state_gain(double phi, double Q, double R);

struct Estimate {
  Params params;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Likelihood is flat in phi (no persistent signal detectable).
  bool degenerate = false;
};

/// Maximizes the prediction-error likelihood over (phi, Q, R0) with gamma
/// fixed. Starts from a coarse grid, refines with a simplex search in
/// (logit phi, log Q, log R0). Deterministic. Requires T >= 100.
Estimate estimate_params(std::span<const double> observations, std::span<const double> sigma,
                         std::span<const double> sigma_bar, double gamma, int max_iterations = 2000);

}  // namespace regimeflow::kalman
