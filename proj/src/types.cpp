#include "regimeflow/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace regimeflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveMarketCap: return "NonPositiveMarketCap";
    case ErrorCode::NegativeValue: return "NegativeValue";
    case ErrorCode::InvalidReturn: return "InvalidReturn";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::UnparseableDate: return "UnparseableDate";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyPanel: return "EmptyPanel";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::EmptyAfterFilters: return "EmptyAfterFilters";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonPositiveBaseline: return "NonPositiveBaseline";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ZeroLikelihood: return "ZeroLikelihood";
    case ErrorCode::DegenerateRegime: return "DegenerateRegime";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingArtifacts: return "MissingArtifacts";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::size_t row)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), row_(row) {}

std::string_view to_string(InvestorType t) {
  switch (t) {
    case InvestorType::Foreign: return "Foreign";
    case InvestorType::Institutional: return "Institutional";
    case InvestorType::Individual: return "Individual";
  }
  return "?";
}

std::string_view short_code(InvestorType t) {
  switch (t) {
    case InvestorType::Foreign: return "for";
    case InvestorType::Institutional: return "ins";
    case InvestorType::Individual: return "ind";
  }
  return "?";
}

InvestorType parse_investor(std::string_view name) {
  for (auto t : kInvestorTypes) {
    if (name == to_string(t) || name == short_code(t)) return t;
  }
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto t : kInvestorTypes) {
    std::string n(to_string(t));
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == n) return t;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown investor type '" + std::string(name) + "'");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::StaticRaw: return "StaticRaw";
    case Variant::KalmanFiltered: return "KalmanFiltered";
    case Variant::AllWeather: return "AllWeather";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (auto v : kVariants) {
    if (name == to_string(v)) return v;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown strategy variant '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Date

Date::Date(int year, unsigned month, unsigned day)
    : ymd_(std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}) {
  if (!ymd_.ok()) {
    throw Error(ErrorCode::UnparseableDate, "invalid calendar date");
  }
}

Date Date::parse(std::string_view text) {
  auto fail = [&] {
    return Error(ErrorCode::UnparseableDate, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse_part = [&](std::size_t pos, std::size_t len, auto& out) {
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    if (ec != std::errc{} || ptr != first + len) throw fail();
  };
  parse_part(0, 4, y);
  parse_part(5, 2, m);
  parse_part(8, 2, d);
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw fail();
  return Date(ymd);
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

Date Date::plus_days(int n) const {
  std::chrono::sys_days s{ymd_};
  s += std::chrono::days{n};
  return Date(std::chrono::year_month_day{s});
}

bool Date::is_weekend() const {
  std::chrono::weekday w{std::chrono::sys_days{ymd_}};
  return w == std::chrono::Saturday || w == std::chrono::Sunday;
}

// ---------------------------------------------------------------------------
// Panel validation

namespace {

void check_row(const PanelObservation& r, std::size_t row) {
  auto where = [&] { return " at row " + std::to_string(row) + " (" + r.stock_id + ", " + r.date.iso() + ")"; };
  for (std::size_t i = 0; i < kNumInvestorTypes; ++i) {
    if (!std::isfinite(r.buy_value[i]) || !std::isfinite(r.sell_value[i])) {
      throw Error(ErrorCode::NonFiniteInput, "non-finite trade value" + where(), row);
    }
    if (r.buy_value[i] < 0.0 || r.sell_value[i] < 0.0) {
      throw Error(ErrorCode::NegativeValue, "negative buy/sell value" + where(), row);
    }
  }
  if (!(r.market_cap > 0.0) || !std::isfinite(r.market_cap)) {
    throw Error(ErrorCode::NonPositiveMarketCap, "market_cap must be > 0" + where(), row);
  }
  if (!std::isfinite(r.close_return) || r.close_return <= -1.0) {
    throw Error(ErrorCode::InvalidReturn, "return must be finite and > -1" + where(), row);
  }
}

}  // namespace

ValidatedPanel validate_panel(std::vector<PanelObservation> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyPanel, "panel has no rows");
  for (std::size_t i = 0; i < rows.size(); ++i) check_row(rows[i], i);

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].stock_id != rows[b].stock_id) return rows[a].stock_id < rows[b].stock_id;
    return rows[a].date < rows[b].date;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = rows[order[k - 1]];
    const auto& cur = rows[order[k]];
    if (prev.stock_id == cur.stock_id && prev.date == cur.date) {
      throw Error(ErrorCode::DuplicateKey,
                  "duplicate (" + cur.stock_id + ", " + cur.date.iso() + ") at rows " +
                      std::to_string(order[k - 1]) + " and " + std::to_string(order[k]),
                  order[k]);
    }
  }
  std::vector<PanelObservation> sorted;
  sorted.reserve(rows.size());
  for (auto i : order) sorted.push_back(std::move(rows[i]));
  return ValidatedPanel(std::move(sorted));
}

ValidatedPanel validate_panel(const ValidatedPanel& panel) {
  return validate_panel(std::vector<PanelObservation>(panel.rows()));
}

// ---------------------------------------------------------------------------

void FlowSeries::check() const {
  const auto n = dates.size();
  auto same = [n](const std::vector<double>& v) { return v.size() == n; };
  if (!same(returns) || !same(realized_vol) || !same(vol_baseline) || !same(market_cap) ||
      !same(flow[0]) || !same(flow[1]) || !same(flow[2])) {
    throw Error(ErrorCode::LengthMismatch, "FlowSeries '" + stock_id + "' arrays differ in length");
  }
  for (std::size_t t = 1; t < n; ++t) {
    if (!(dates[t - 1] < dates[t])) {
      throw Error(ErrorCode::InvalidArgument, "FlowSeries '" + stock_id + "' dates not strictly increasing");
    }
  }
  for (double v : realized_vol) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "FlowSeries '" + stock_id + "' has negative vol");
  }
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(kalman.phi > 0.0 && kalman.phi < 1.0)) fail("kalman.phi must lie in (0,1)");
  if (!(kalman.state_noise > 0.0)) fail("kalman.Q must be > 0");
  if (!(kalman.measurement_noise > 0.0)) fail("kalman.R0 must be > 0");
  if (!(kalman.gamma >= 0.0)) fail("kalman.gamma must be >= 0");
  if (!(ewma_decay > 0.0 && ewma_decay < 1.0)) fail("ewma_decay must lie in (0,1)");
  if (vol_seed_window < 2) fail("vol_seed_window must be >= 2");
  if (regime.n_regimes != 3) fail("regime.n_regimes must be 3");
  if (!(regime.crisis_threshold > 0.0 && regime.crisis_threshold < 1.0)) fail("regime.crisis_threshold must lie in (0,1)");
  if (regime.max_iterations < 1) fail("regime.max_iterations must be >= 1");
  if (!(regime.tolerance > 0.0)) fail("regime.tolerance must be > 0");
  if (!(asymmetry.shock_multiple > 0.0)) fail("asymmetry.k must be > 0");
  if (!(asymmetry.return_scale > 0.0)) fail("asymmetry.return_scale must be > 0");
  if (!(backtest.decile > 0.0 && backtest.decile <= 0.5)) fail("backtest.decile must lie in (0,0.5]");
  if (!(backtest.threshold_cap > 0.0 && backtest.threshold_cap <= 1.0)) fail("backtest.threshold_cap must lie in (0,1]");
  if (!(backtest.cost_bps >= 0.0)) fail("backtest.cost_bps must be >= 0");
  if (!(backtest.annualization > 0.0)) fail("backtest.annualization must be > 0");
  if (backtest.train_days < 30) fail("backtest.train_days must be >= 30");
  if (bootstrap.iterations < 1) fail("bootstrap.iterations must be >= 1");
  if (bootstrap.block_length < 1) fail("bootstrap.block_length must be >= 1");
  auto check_q = [&](double lo, double hi, const char* name) {
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) fail(std::string(name) + " quantiles must satisfy 0 <= lower < upper <= 1");
  };
  check_q(flow_winsor_lower, flow_winsor_upper, "flow winsorization");
  check_q(return_winsor_lower, return_winsor_upper, "return winsorization");
  if (min_observations < 2) fail("min_observations must be >= 2");
  if (threads < 0) fail("threads must be >= 0");
}

}  // namespace regimeflow
