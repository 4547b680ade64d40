#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace regimeflow {

enum class ErrorCode {
  NonPositiveMarketCap,
  NegativeValue,
  InvalidReturn,
  DuplicateKey,
  UnparseableDate,
  MalformedRow,
  EmptyPanel,
  SeriesTooShort,
  EmptyAfterFilters,
  InvalidConfig,
  InvalidArgument,
  LengthMismatch,
  NonFiniteInput,
  NonPositiveBaseline,
  RankDeficient,
  ZeroLikelihood,
  DegenerateRegime,
  Io,
  MissingArtifacts,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. `row` is the offending input
/// row (0-based) when the error is attributable to one, otherwise npos.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(ErrorCode code, const std::string& message, std::size_t row = npos);

  ErrorCode code() const noexcept { return code_; }
  std::size_t row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::size_t row_;
};

enum class InvestorType { Foreign = 0, Institutional = 1, Individual = 2 };

inline constexpr std::size_t kNumInvestorTypes = 3;
inline constexpr std::array<InvestorType, kNumInvestorTypes> kInvestorTypes = {
    InvestorType::Foreign, InvestorType::Institutional, InvestorType::Individual};

constexpr std::size_t index(InvestorType t) { return static_cast<std::size_t>(t); }

/// "Foreign", "Institutional", "Individual".
std::string_view to_string(InvestorType t);
/// "for", "ins", "ind" as used in CSV column names.
std::string_view short_code(InvestorType t);

/// Calendar day used as an opaque ordered key. No trading-calendar logic.
class Date {
 public:
  Date() = default;
  Date(int year, unsigned month, unsigned day);
  explicit Date(std::chrono::year_month_day ymd) : ymd_(ymd) {}

  /// Parses strict `YYYY-MM-DD`; throws Error(UnparseableDate).
  static Date parse(std::string_view text);

  std::string iso() const;
  int year() const { return static_cast<int>(ymd_.year()); }
  unsigned month() const { return static_cast<unsigned>(ymd_.month()); }
  unsigned day() const { return static_cast<unsigned>(ymd_.day()); }
  /// year * 12 + month - 1; consecutive months differ by one.
  int month_index() const { return year() * 12 + static_cast<int>(month()) - 1; }

  Date plus_days(int n) const;
  bool is_weekend() const;

  std::chrono::year_month_day ymd() const { return ymd_; }

  friend bool operator==(const Date& a, const Date& b) { return a.ymd_ == b.ymd_; }
  friend std::strong_ordering operator<=>(const Date& a, const Date& b) {
    return a.ymd_ <=> b.ymd_;
  }

 private:
  std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::month{1},
                                   std::chrono::day{1}};
};

/// One stock-day record. `market_cap` is the prior-day capitalization.
struct PanelObservation {
  Date date;
  std::string stock_id;
  std::array<double, kNumInvestorTypes> buy_value{};
  std::array<double, kNumInvestorTypes> sell_value{};
  double market_cap = 0.0;
  double close_return = 0.0;
};

/// Panel sorted by (stock_id, date) with unique keys. Only validate_panel
/// constructs a non-empty one.
class ValidatedPanel {
 public:
  ValidatedPanel() = default;

  const std::vector<PanelObservation>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

 private:
  friend ValidatedPanel validate_panel(std::vector<PanelObservation> rows);
  explicit ValidatedPanel(std::vector<PanelObservation> rows) : rows_(std::move(rows)) {}
  std::vector<PanelObservation> rows_;
};

/// Sorts by (stock_id, date) and checks every row invariant.
/// Throws Error naming the offending row (index into the input order).
ValidatedPanel validate_panel(std::vector<PanelObservation> rows);
/// Revalidation of an already validated panel; returns it unchanged.
ValidatedPanel validate_panel(const ValidatedPanel& panel);

/// Per-stock (or market aggregate) daily series. All arrays share one length.
struct FlowSeries {
  std::string stock_id;
  std::vector<Date> dates;
  std::array<std::vector<double>, kNumInvestorTypes> flow;
  std::vector<double> returns;
  std::vector<double> realized_vol;
  std::vector<double> vol_baseline;
  std::vector<double> market_cap;

  std::size_t size() const { return dates.size(); }

  /// Throws Error(LengthMismatch / InvalidArgument) if any invariant fails.
  void check() const;
};

enum class BaselineMode { Expanding, FullSample };

enum class Variant { StaticRaw, KalmanFiltered, AllWeather };
inline constexpr std::array<Variant, 3> kVariants = {Variant::StaticRaw, Variant::KalmanFiltered,
                                                     Variant::AllWeather};
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
InvestorType parse_investor(std::string_view name);

enum class StopLossProfile { Auto, Momentum, Contrarian, Off };

struct KalmanConfig {
  double phi = 0.95;
  double state_noise = 1e-8;      // Q
  double measurement_noise = 1e-6;  // R0
  double gamma = 1.0;
  bool estimate = true;
};

struct RegimeConfig {
  int n_regimes = 3;
  double crisis_threshold = 0.30;
  int max_iterations = 500;
  double tolerance = 1e-6;
};

struct AsymmetryConfig {
  double shock_multiple = 2.0;  // k
  double return_scale = 100.0;  // |r| measured in percentage points
  bool level_mode = false;      // regress S instead of dS
  bool stock_level_sigma = false;
  /// Coefficient covariance for t-stats and the Wald test.
  enum class Errors { Conventional, Robust, ClusteredByDate } errors = Errors::Conventional;
};

struct BacktestConfig {
  double decile = 0.10;
  double threshold_cap = 0.60;
  bool stop_loss = true;
  StopLossProfile stop_loss_profile = StopLossProfile::Auto;
  double cost_bps = 0.0;
  double annualization = 252.0;
  int train_days = 250;
  std::array<double, kNumInvestorTypes> orientation{1.0, 1.0, 1.0};
  InvestorType robustness_investor = InvestorType::Foreign;
  Variant robustness_variant = Variant::AllWeather;
};

struct BootstrapConfig {
  int iterations = 1000;
  int block_length = 10;
};

struct RunConfig {
  KalmanConfig kalman;
  double ewma_decay = 0.94;  // lambda
  int vol_seed_window = 20;
  BaselineMode baseline_mode = BaselineMode::Expanding;
  RegimeConfig regime;
  AsymmetryConfig asymmetry;
  BacktestConfig backtest;
  BootstrapConfig bootstrap;
  double flow_winsor_lower = 0.01;
  double flow_winsor_upper = 0.99;
  double return_winsor_lower = 0.0;
  double return_winsor_upper = 1.0;
  int min_observations = 60;
  std::uint64_t seed = 20200102;
  int threads = 0;

  /// Throws Error(InvalidConfig) naming the first violated invariant.
  void validate() const;
};

}  // namespace regimeflow
