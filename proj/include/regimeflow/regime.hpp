#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "regimeflow/econometrics.hpp"
#include "regimeflow/types.hpp"

namespace regimeflow::regime {

inline constexpr int kStates = 3;
using Probs = std::array<double, kStates>;

enum class Label { Bull = 0, Normal = 1, Crisis = 2 };
std::string_view to_string(Label l);

/// Three-state Gaussian Markov-switching model for returns:
///   r_t = mu[s_t] + sd[s_t] e_t,  Pr(s_t = j | s_{t-1} = i) = P(i, j).
struct Model {
  Probs mean{};
  Probs sd{};
  Eigen::Matrix3d transition = Eigen::Matrix3d::Identity();
  /// Distribution of s_0. Empty-initialized models use the stationary one.
  Probs initial{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<Label, kStates> labels{Label::Bull, Label::Normal, Label::Crisis};
  double log_likelihood = 0.0;

  // EM diagnostics.
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  int restarts = 0;
  bool tie_break = false;
  /// Smallest pairwise separation; `merged` when two regimes are near-identical.
  double separation = 0.0;
  bool merged = false;

  /// Throws Error(InvalidArgument) if rows of P do not sum to 1 +- 1e-10,
  /// any sd <= 0, or labels are not a permutation.
  void check() const;
  /// Index of the regime carrying `label`.
  int index_of(Label label) const;
};

/// Stationary distribution of an ergodic transition matrix (left unit eigenvector).
Probs stationary_distribution(const Eigen::Matrix3d& P);

struct Path {
  std::vector<Probs> predicted;  // xi_{t|t-1}
  std::vector<Probs> filtered;   // xi_{t|t}
  std::vector<Probs> smoothed;   // xi_{t|T}; empty until kim_smoother runs
  double log_likelihood = 0.0;

  std::size_t size() const { return filtered.size(); }
  /// Argmax of filtered (or smoothed) probabilities; lowest index on ties.
  std::vector<int> most_likely(bool smoothed_probs = false) const;
  /// Filtered probability of the model's Crisis regime exceeding threshold.
  std::vector<std::uint8_t> crisis_flags(const Model& m, double threshold) const;
};

/// Forward recursion in log space. Throws Error(ZeroLikelihood) if every
/// density underflows at some t and Error(NonFiniteInput) for NaN returns.
Path hamilton_filter(std::span<const double> returns, const Model& model);

/// Backward recursion. smoothed[T-1] == filtered[T-1].
std::vector<Probs> kim_smoother(const Path& path, const Model& model);

struct LabelMap {
  std::array<Label, kStates> labels;
  bool tie_break = false;
};

/// Crisis = largest sd; of the rest, Bull = higher mean. Ties are broken by
/// index order and flagged when sds (or means) are within 1e-10.
LabelMap label_regimes(const Model& model);

/// Permutes regimes into (Bull, Normal, Crisis) order.
Model canonical_order(const Model& model);

/// Pairwise separation sqrt((dmu / sd_avg)^2 + (log sd_i / sd_j)^2), minimised over pairs.
double separation(const Model& model);
inline constexpr double kMergeThreshold = 0.15;

struct EmOptions {
  int max_iterations = 500;
  double tolerance = 1e-6;
  double sd_floor = 1e-6;
  int max_restarts = 5;
};

/// EM with smoothed-probability E-step and closed-form M-step; tertile
/// initialization. Returns the model in canonical (Bull, Normal, Crisis)
/// order. Throws Error(DegenerateRegime) when every restart collapses.
Model fit_em(std::span<const double> returns, const EmOptions& options = {});

/// Deterministic tertile warm start used by fit_em.
Model initial_model(std::span<const double> returns);

struct RegimeFit {
  Label label;
  double alpha = 0.0, beta = 0.0;
  double se_beta = 0.0, t_beta = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
  bool skipped = false;  // fewer than kMinRegimeSample observations
};

inline constexpr std::size_t kMinRegimeSample = 30;

struct RegimeRegression {
  std::array<RegimeFit, kStates> fits;  // indexed by Label
  std::size_t usable = 0;
};

/// Pooled per-regime OLS of r_{t+1} on S_t. Each stock observation (t, t+1)
/// is assigned to the regime state[date_index(t)] on the market calendar.
/// `market_dates` is the calendar the state vector is aligned to.
RegimeRegression regime_conditional_regression(const std::vector<econ::SignalSeries>& stocks,
                                               const std::vector<Date>& market_dates,
                                               const std::vector<int>& state, const Model& model);

}  // namespace regimeflow::regime
