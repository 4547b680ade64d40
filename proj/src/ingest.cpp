#include "regimeflow/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace regimeflow {

double normalize_flow(const PanelObservation& obs, InvestorType investor) {
  const auto i = index(investor);
  return (obs.buy_value[i] - obs.sell_value[i]) / obs.market_cap;
}

std::vector<double> realized_vol(std::span<const double> returns, double decay, int seed_window) {
  if (returns.size() < 2) {
    throw Error(ErrorCode::SeriesTooShort, "realized_vol needs at least two returns");
  }
  if (!(decay > 0.0 && decay < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "EWMA decay must lie in (0,1)");
  }
  if (seed_window < 2) throw Error(ErrorCode::InvalidArgument, "seed window must be >= 2");

  const std::size_t n = returns.size();
  const auto window = static_cast<std::size_t>(seed_window);
  std::vector<double> sigma(n, 0.0);

  // Running sums for the expanding sample variance during warm-up.
  double sum = 0.0, sum_sq = 0.0;
  double var = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    const double r = returns[t - 1];
    if (t <= window) {
      sum += r;
      sum_sq += r * r;
      if (t == 1) {
        var = r * r;
      } else {
        const double k = static_cast<double>(t);
        const double mean = sum / k;
        var = std::max(0.0, (sum_sq - k * mean * mean) / (k - 1.0));
      }
    } else {
      var = decay * var + (1.0 - decay) * r * r;
    }
    sigma[t] = std::sqrt(var);
  }
  return sigma;
}

std::vector<double> vol_baseline(std::span<const double> sigma, BaselineMode mode) {
  const std::size_t n = sigma.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  if (mode == BaselineMode::FullSample) {
    const double mean = std::accumulate(sigma.begin(), sigma.end(), 0.0) / static_cast<double>(n);
    std::fill(out.begin(), out.end(), mean);
    return out;
  }
  out[0] = sigma[0];
  double running = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    running += sigma[t - 1];
    out[t] = running / static_cast<double>(t);
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty series");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> winsorize(std::span<const double> series, double lower, double upper) {
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "winsorize requires 0 <= lower < upper <= 1");
  }
  std::vector<double> out(series.begin(), series.end());
  if ((lower == 0.0 && upper == 1.0) || out.empty()) return out;
  std::vector<double> sorted = out;
  std::sort(sorted.begin(), sorted.end());
  clamp_in_place(out, quantile_sorted(sorted, lower), quantile_sorted(sorted, upper));
  return out;
}

void clamp_in_place(std::vector<double>& series, double lo, double hi) {
  for (auto& v : series) v = std::clamp(v, lo, hi);
}

std::size_t IngestStats::dropped_total() const {
  std::size_t total = 0;
  for (const auto& [reason, n] : rows_dropped) total += n;
  return total;
}

IngestOptions IngestOptions::from(const RunConfig& cfg) {
  IngestOptions o;
  o.ewma_decay = cfg.ewma_decay;
  o.vol_seed_window = cfg.vol_seed_window;
  o.baseline_mode = cfg.baseline_mode;
  o.min_observations = cfg.min_observations;
  o.flow_winsor_lower = cfg.flow_winsor_lower;
  o.flow_winsor_upper = cfg.flow_winsor_upper;
  o.return_winsor_lower = cfg.return_winsor_lower;
  o.return_winsor_upper = cfg.return_winsor_upper;
  return o;
}

namespace {

bool winsor_enabled(double lo, double hi) { return !(lo == 0.0 && hi == 1.0); }

// Pooled clamp bounds fit on values dated <= fit_end.
template <typename Get>
std::pair<double, double> pooled_bounds(const std::vector<FlowSeries>& stocks, Get get,
                                        const std::optional<Date>& fit_end, double lo, double hi) {
  std::vector<double> pool;
  for (const auto& s : stocks) {
    const auto& v = get(s);
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (!fit_end || s.dates[t] <= *fit_end) pool.push_back(v[t]);
    }
  }
  if (pool.empty()) {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  std::sort(pool.begin(), pool.end());
  return {quantile_sorted(pool, lo), quantile_sorted(pool, hi)};
}

}  // namespace

IngestResult build_flow_series(const ValidatedPanel& panel, const IngestOptions& options) {
  IngestResult result;
  auto& stats = result.stats;
  const auto& rows = panel.rows();
  stats.rows_read = rows.size();

  // Rows are sorted by (stock_id, date): split into per-stock runs.
  std::size_t begin = 0;
  while (begin < rows.size()) {
    std::size_t end = begin;
    while (end < rows.size() && rows[end].stock_id == rows[begin].stock_id) ++end;
    ++stats.stocks_read;
    const std::size_t n = end - begin;
    if (n < static_cast<std::size_t>(options.min_observations)) {
      stats.rows_dropped["min_observations"] += n;
    } else {
      FlowSeries s;
      s.stock_id = rows[begin].stock_id;
      s.dates.reserve(n);
      for (auto& f : s.flow) f.reserve(n);
      for (std::size_t k = begin; k < end; ++k) {
        const auto& r = rows[k];
        s.dates.push_back(r.date);
        for (auto t : kInvestorTypes) s.flow[index(t)].push_back(normalize_flow(r, t));
        s.returns.push_back(r.close_return);
        s.market_cap.push_back(r.market_cap);
      }
      stats.rows_retained += n;
      result.stocks.push_back(std::move(s));
    }
    begin = end;
  }
  stats.rows_dropped.try_emplace("min_observations", 0);
  if (result.stocks.empty()) {
    throw Error(ErrorCode::EmptyAfterFilters, "no stock has at least " +
                                                  std::to_string(options.min_observations) + " observations");
  }
  stats.stocks_retained = result.stocks.size();

  if (winsor_enabled(options.flow_winsor_lower, options.flow_winsor_upper)) {
    for (auto t : kInvestorTypes) {
      const auto i = index(t);
      auto [lo, hi] = pooled_bounds(result.stocks, [i](const FlowSeries& s) -> const auto& { return s.flow[i]; },
                                    options.winsor_fit_end, options.flow_winsor_lower, options.flow_winsor_upper);
      for (auto& s : result.stocks) clamp_in_place(s.flow[i], lo, hi);
    }
  }
  if (winsor_enabled(options.return_winsor_lower, options.return_winsor_upper)) {
    auto [lo, hi] = pooled_bounds(result.stocks, [](const FlowSeries& s) -> const auto& { return s.returns; },
                                  options.winsor_fit_end, options.return_winsor_lower, options.return_winsor_upper);
    for (auto& s : result.stocks) clamp_in_place(s.returns, lo, hi);
  }

  for (auto& s : result.stocks) {
    s.realized_vol = realized_vol(s.returns, options.ewma_decay, options.vol_seed_window);
    s.vol_baseline = vol_baseline(s.realized_vol, options.baseline_mode);
    s.check();
  }

  // Market aggregate: one reduction over per-day partial sums.
  struct DaySums {
    double cap = 0.0, cap_ret = 0.0;
    std::array<double, kNumInvestorTypes> flow{};
    std::size_t count = 0;
  };
  std::map<Date, DaySums> days;
  for (const auto& s : result.stocks) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      auto& d = days[s.dates[t]];
      d.cap += s.market_cap[t];
      d.cap_ret += s.market_cap[t] * s.returns[t];
      for (std::size_t i = 0; i < kNumInvestorTypes; ++i) d.flow[i] += s.flow[i][t];
      ++d.count;
    }
  }
  auto& m = result.market;
  m.stock_id = "MARKET";
  for (const auto& [date, d] : days) {
    m.dates.push_back(date);
    m.returns.push_back(d.cap_ret / d.cap);
    m.market_cap.push_back(d.cap);
    for (std::size_t i = 0; i < kNumInvestorTypes; ++i) m.flow[i].push_back(d.flow[i] / static_cast<double>(d.count));
  }
  if (m.size() >= 2) {
    m.realized_vol = realized_vol(m.returns, options.ewma_decay, options.vol_seed_window);
  } else {
    m.realized_vol.assign(m.size(), 0.0);
  }
  m.vol_baseline = vol_baseline(m.realized_vol, options.baseline_mode);
  m.check();

  stats.first_date = m.dates.front();
  stats.last_date = m.dates.back();
  return result;
}

}  // namespace regimeflow
