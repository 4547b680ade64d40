#include "regimeflow/kalman.hpp"

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace regimeflow::kalman {

void Params::check() const {
  if (!(phi > 0.0 && phi < 1.0)) throw Error(ErrorCode::InvalidArgument, "phi must lie in (0,1)");
  if (!(state_noise > 0.0)) throw Error(ErrorCode::InvalidArgument, "Q must be > 0");
  if (!(measurement_noise > 0.0)) throw Error(ErrorCode::InvalidArgument, "R0 must be > 0");
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be >= 0");
}

State initial_state(const Params& p) {
  State s;
  s.mean = 0.0;
  s.variance = p.stationary_variance();
  return s;
}

double measurement_variance(const Params& p, double sigma, double sigma_bar) {
  if (!(sigma_bar > 0.0)) throw Error(ErrorCode::NonPositiveBaseline, "sigma_bar must be > 0");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  if (p.gamma == 0.0) return p.measurement_noise;
  if (sigma == 0.0) return p.measurement_noise * kVolFloor;
  return p.measurement_noise * std::pow(sigma / sigma_bar, p.gamma);
}

State step(const State& prior, const Params& p, double observation, double measurement_var) {
  if (!std::isfinite(observation) || !std::isfinite(prior.mean) || !std::isfinite(prior.variance) ||
      std::isnan(measurement_var)) {
    throw Error(ErrorCode::NonFiniteInput, "Kalman step received a non-finite value");
  }
  State next;
  const double m_pred = p.phi * prior.mean;
  const double p_pred = p.phi * p.phi * prior.variance + p.state_noise;
  double gain;
  if (std::isinf(measurement_var)) {
    gain = 0.0;
  } else {
    gain = p_pred / (p_pred + measurement_var);
  }
  next.mean = m_pred + gain * (observation - m_pred);
  next.variance = (1.0 - gain) * p_pred;
  next.gain = gain;
  next.measurement_var = measurement_var;
  next.predicted_var = p_pred;
  return next;
}

namespace {

double effective_r(const Params& p, double sigma, double sigma_bar) {
  if (!(sigma_bar > 0.0)) return p.measurement_noise;
  return measurement_variance(p, sigma, sigma_bar);
}

void check_lengths(std::span<const double> obs, std::span<const double> sigma, std::span<const double> sigma_bar) {
  if (obs.size() != sigma.size() || obs.size() != sigma_bar.size()) {
    throw Error(ErrorCode::LengthMismatch, "observation, sigma and sigma_bar lengths differ");
  }
}

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

Output filter_series(std::span<const double> observations, std::span<const double> sigma,
                     std::span<const double> sigma_bar, const Params& p) {
  check_lengths(observations, sigma, sigma_bar);
  const std::size_t n = observations.size();
  Output out;
  out.filtered.resize(n);
  out.gain.resize(n);
  out.measurement_var.resize(n);
  out.predicted_var.resize(n);
  out.posterior_var.resize(n);
  out.innovation.resize(n);
  out.innovation_var.resize(n);

  State state = initial_state(p);
  for (std::size_t t = 0; t < n; ++t) {
    const double r = effective_r(p, sigma[t], sigma_bar[t]);
    const double m_pred = p.phi * state.mean;
    state = step(state, p, observations[t], r);
    out.filtered[t] = state.mean;
    out.gain[t] = state.gain;
    out.measurement_var[t] = r;
    out.predicted_var[t] = state.predicted_var;
    out.posterior_var[t] = state.variance;
    const double v = observations[t] - m_pred;
    const double f = state.predicted_var + r;
    out.innovation[t] = v;
    out.innovation_var[t] = f;
    out.log_likelihood += -0.5 * (kLog2Pi + std::log(f) + v * v / f);
  }
  return out;
}

double log_likelihood(std::span<const double> observations, std::span<const double> sigma,
                      std::span<const double> sigma_bar, const Params& p) {
  check_lengths(observations, sigma, sigma_bar);
  double mean = 0.0;
  double var = p.stationary_variance();
  double ll = 0.0;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    const double r = effective_r(p, sigma[t], sigma_bar[t]);
    const double m_pred = p.phi * mean;
    const double p_pred = p.phi * p.phi * var + p.state_noise;
    const double f = p_pred + r;
    const double v = observations[t] - m_pred;
    ll += -0.5 * (kLog2Pi + std::log(f) + v * v / f);
    const double k = p_pred / f;
    mean = m_pred + k * v;
    var = (1.0 - k) * p_pred;
  }
  return ll;
}

double steady_state_predicted_variance(double phi, double Q, double R) {
  // P^2 + P (R (1 - phi^2) - Q) - Q R = 0, positive root.
  const double b = R * (1.0 - phi * phi) - Q;
  return 0.5 * (-b + std::sqrt(b * b + 4.0 * Q * R));
}

double steady_state_gain(double phi, double Q, double R) {
  const double p = steady_state_predicted_variance(phi, Q, R);
  return p / (p + R);
}

namespace {

struct Problem {
  std::span<const double> obs, sigma, sigma_bar;
  double gamma;
};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Params unpack(const gsl_vector* x, double gamma) {
  Params p;
  p.phi = std::clamp(logistic(gsl_vector_get(x, 0)), 1e-6, 1.0 - 1e-9);
  p.state_noise = std::exp(gsl_vector_get(x, 1));
  p.measurement_noise = std::exp(gsl_vector_get(x, 2));
  p.gamma = gamma;
  return p;
}

double objective(const gsl_vector* x, void* data) {
  const auto* pr = static_cast<const Problem*>(data);
  const Params p = unpack(x, pr->gamma);
  if (!(p.state_noise > 0.0) || !(p.measurement_noise > 0.0) || !std::isfinite(p.state_noise) ||
      !std::isfinite(p.measurement_noise)) {
    return std::numeric_limits<double>::max();
  }
  const double ll = log_likelihood(pr->obs, pr->sigma, pr->sigma_bar, p);
  return std::isfinite(ll) ? -ll : std::numeric_limits<double>::max();
}

}  // namespace

Estimate estimate_params(std::span<const double> observations, std::span<const double> sigma,
                         std::span<const double> sigma_bar, double gamma, int max_iterations) {
  check_lengths(observations, sigma, sigma_bar);
  if (observations.size() < 100) {
    throw Error(ErrorCode::SeriesTooShort, "estimate_params needs at least 100 observations");
  }
  double mean = 0.0;
  for (double v : observations) mean += v;
  mean /= static_cast<double>(observations.size());
  double var = 0.0;
  for (double v : observations) var += (v - mean) * (v - mean);
  var /= static_cast<double>(observations.size() - 1);
  if (!(var > 0.0)) var = 1e-12;

  Problem problem{observations, sigma, sigma_bar, gamma};

  // Coarse grid over persistence and the signal share of total variance.
  Params best;
  best.gamma = gamma;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double phi : {0.3, 0.6, 0.8, 0.9, 0.95, 0.98}) {
    for (double share : {0.1, 0.5, 0.9}) {
      Params p;
      p.phi = phi;
      p.state_noise = share * var * (1.0 - phi * phi);
      p.measurement_noise = (1.0 - share) * var;
      p.gamma = gamma;
      const double ll = log_likelihood(observations, sigma, sigma_bar, p);
      if (ll > best_ll) {
        best_ll = ll;
        best = p;
      }
    }
  }

  gsl_vector* x = gsl_vector_alloc(3);
  gsl_vector* step_size = gsl_vector_alloc(3);
  gsl_vector_set(x, 0, std::log(best.phi / (1.0 - best.phi)));
  gsl_vector_set(x, 1, std::log(best.state_noise));
  gsl_vector_set(x, 2, std::log(best.measurement_noise));
  gsl_vector_set_all(step_size, 0.5);

  gsl_multimin_function fn{&objective, 3, &problem};
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  gsl_multimin_fminimizer_set(solver, &fn, x, step_size);

  Estimate est;
  int status = GSL_CONTINUE;
  int iter = 0;
  while (status == GSL_CONTINUE && iter < max_iterations) {
    ++iter;
    if (gsl_multimin_fminimizer_iterate(solver) != 0) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), 1e-7);
  }
  est.params = unpack(solver->x, gamma);
  est.log_likelihood = -solver->fval;
  est.iterations = iter;
  est.converged = (status == GSL_SUCCESS);
  if (est.log_likelihood < best_ll) {
    est.params = best;
    est.log_likelihood = best_ll;
  }
  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(step_size);
  gsl_vector_free(x);

  // Profile over phi with the noise variances held at the optimum.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double phi : {0.05, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    Params p = est.params;
    p.phi = phi;
    const double ll = log_likelihood(observations, sigma, sigma_bar, p);
    lo = std::min(lo, ll);
    hi = std::max(hi, ll);
  }
  const double signal_share =
      est.params.stationary_variance() / (est.params.stationary_variance() + est.params.measurement_noise);
  est.degenerate = (hi - lo) < 1.0 || signal_share < 1e-3;
  return est;
}

}  // namespace regimeflow::kalman
