#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "regimeflow/types.hpp"

namespace regimeflow::synth {

/// Generative parameters. Regime index order is (Bull, Normal, Crisis).
///
/// Per stock i and investor type j:
///   theta_t^j = phi theta_{t-1}^j + eta,         eta ~ N(0, Q)
///   S_t^j     = flow_mean_j + theta_t^j + c_t^j + eps,
///               eps ~ N(0, R0 (sigma_it / sigma_bar_it)^gamma)
///   c_t^j     = rho c_{t-1}^j + shock_j(t)
///   r_it      = mu[s_t] + sd[s_t] (m_t + kappa z_it)
///               + beta[s_{t-1}] * size_mult_i * theta_{t-1}^signal / signal_scale
///   shock_j(t) = (b+_j 1[rM_{t-1} > k sM_{t-1}] + b-_j 1[rM_{t-1} < -k sM_{t-1}]) |rM_{t-1}| c
/// The shock response c decays slowly, so dS on a shock day carries the
/// planted response and the reversal that follows is spread thin.
/// sigma_it is the causal EWMA vol of the stock's own returns; rM and sM are
/// the value-weighted market return and its EWMA vol.
struct SynthSpec {
  std::array<double, 3> regime_mean{0.00154, -0.00034, -0.00223};
  std::array<double, 3> regime_sd{0.0054, 0.0124, 0.0387};
  Eigen::Matrix3d transition = default_transition();
  /// Return response to one stationary SD of the latent signal, per regime.
  std::array<double, 3> regime_beta{0.00023, 0.00064, 0.00204};
  InvestorType signal_investor = InvestorType::Foreign;

  std::array<double, kNumInvestorTypes> beta_plus{-0.000035, -0.000021, 0.000089};
  std::array<double, kNumInvestorTypes> beta_minus{0.000070, -0.000045, 0.000014};
  std::array<double, kNumInvestorTypes> flow_mean{-0.000023, -0.000036, 0.000084};
  double shock_multiple = 2.0;
  double return_scale = 100.0;
  double shock_persistence = 0.5;  // rho

  double phi = 0.95;
  double state_noise = 1e-8;        // Q (0 allowed)
  double measurement_noise = 1e-6;  // R0 (0 allowed)
  double gamma = 1.0;

  /// Idiosyncratic shock size relative to the common one (kappa). The
  /// value-weighted market then carries close to sd[s] itself.
  double idiosyncratic_ratio = 2.0;
  /// Signal strength multiplier (cap_i / median cap)^(-size_elasticity).
  double size_elasticity = 0.0;

  int n_stocks = 100;
  int n_days = 1200;
  std::uint64_t seed = 42;
  Date start_date{2020, 1, 2};

  double cap_min = 1e11;
  double cap_max = 1e13;
  double base_turnover = 0.002;  // gross two-sided trading per type as a fraction of cap

  double ewma_decay = 0.94;
  int vol_seed_window = 20;

  static Eigen::Matrix3d default_transition();

  /// Throws Error(InvalidConfig) on rows of P not summing to 1 +- 1e-12,
  /// sd <= 0, or out-of-range scalars.
  void check() const;
  /// Stationary SD of theta; 1 when Q == 0.
  double signal_scale() const;
};

struct Truth {
  SynthSpec spec;
  std::vector<Date> dates;
  std::vector<int> regime;                  // s_t, 0 = Bull, 1 = Normal, 2 = Crisis
  std::vector<double> market_factor;        // m_t
  std::vector<double> market_return;        // value-weighted rM_t
  std::vector<std::string> stock_ids;
  std::vector<double> initial_cap;
  std::vector<double> size_multiplier;
  /// theta[i][j][t] for stock i, investor j.
  std::vector<std::array<std::vector<double>, kNumInvestorTypes>> theta;
  std::vector<std::uint8_t> positive_shock, negative_shock;
};

struct Generated {
  std::vector<PanelObservation> rows;  // sorted by (stock_id, date)
  Truth truth;
};

/// Weekday dates starting at `start`.
std::vector<Date> business_days(Date start, int n);

/// Markov chain from P. Initial state drawn from the stationary distribution
/// unless `start` is given.
std::vector<int> generate_regime_path(const Eigen::Matrix3d& P, int T, std::mt19937_64& rng,
                                      std::optional<int> start = std::nullopt);

/// Market-level Eq.-5 series r_t = mu[s_t] + sd[s_t] e_t.
struct MarketSeries {
  std::vector<int> regime;
  std::vector<double> returns;
};
MarketSeries generate_market_returns(const SynthSpec& spec, int T, std::uint64_t seed);

/// Full panel plus hidden truth. Identical spec gives a bit-identical result
/// regardless of thread count.
Generated generate_panel(const SynthSpec& spec);

/// Rebuilds the panel from the spec stored in a truth record.
Generated regenerate(const Truth& truth);

std::string stock_name(int i);

}  // namespace regimeflow::synth
