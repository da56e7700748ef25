#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "funcast/error.hpp"
#include "funcast/linalg.hpp"

namespace funcast {

inline constexpr std::int64_t kSecondsPerDay = 86400;

struct PricePoint {
  std::int64_t timestamp = 0;  // UTC, Unix seconds
  double price = 0.0;
};

enum class FillPolicy { ForwardFill, Strict };

struct ReturnOptions {
  std::int64_t grid_step = 3600;      // seconds; must divide one day
  std::int64_t day_offset_steps = 0;  // day boundary shift in whole grid steps
  FillPolicy fill = FillPolicy::ForwardFill;
};

/// Consecutive grid-step log-returns (percent), not yet cut into days.
struct FlatReturns {
  std::int64_t grid_step = 0;
  std::vector<std::int64_t> end_times;  // timestamp at which each return is realised
  std::vector<double> values;
  std::vector<bool> filled;             // endpoint price carried forward
};

struct ReturnCurve {
  int day_index = 0;            // 1-based position within the series
  std::int64_t day_start = 0;   // UTC seconds of the day boundary
  std::vector<double> values;   // percent log-returns
  std::vector<double> grid;     // fraction of the day at each return's end, in (0,1]
};

struct DailyReturns {
  std::vector<ReturnCurve> curves;
  std::int64_t grid_step = 0;
  std::int64_t day_offset_steps = 0;
  FillPolicy fill = FillPolicy::ForwardFill;
  int filled_points = 0;  // within the retained days
  int dropped_days = 0;   // incomplete leading/trailing days
};

/// Grid labels t/T for t = 1..T.
inline std::vector<double> day_grid(int points_per_day) {
  std::vector<double> g(static_cast<std::size_t>(points_per_day));
  for (int t = 0; t < points_per_day; ++t) g[static_cast<std::size_t>(t)] = (t + 1.0) / points_per_day;
  return g;
}

namespace detail {
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
}  // namespace detail

inline void validate_prices(const std::vector<PricePoint>& prices) {
  for (std::size_t i = 0; i < prices.size(); ++i) {
    require(prices[i].price > 0.0 && std::isfinite(prices[i].price), ErrorCode::NonPositivePrice,
            "price at row " + std::to_string(i) + " is not positive");
    if (i > 0)
      require(prices[i].timestamp > prices[i - 1].timestamp, ErrorCode::NonIncreasingTimestamp,
              "timestamps must be strictly increasing (row " + std::to_string(i) + ")");
  }
}

/// Samples prices on the grid and differences their logs. Under ForwardFill the
/// grid price is the last tick at or before the grid point; Strict requires a
/// tick exactly on every grid point.
inline FlatReturns compute_flat_returns(const std::vector<PricePoint>& prices, std::int64_t grid_step,
                                        FillPolicy fill = FillPolicy::ForwardFill) {
  require(grid_step > 0, ErrorCode::PreconditionViolation, "grid_step must be positive");
  validate_prices(prices);
  FlatReturns out;
  out.grid_step = grid_step;
  if (prices.size() < 2) return out;

  if (fill == FillPolicy::Strict) {
    for (std::size_t i = 0; i < prices.size(); ++i) {
      require(prices[i].timestamp % grid_step == 0, ErrorCode::GridMisaligned,
              "timestamp " + std::to_string(prices[i].timestamp) + " is not on the grid");
      if (i > 0)
        require(prices[i].timestamp - prices[i - 1].timestamp == grid_step, ErrorCode::GridMisaligned,
                "gap before timestamp " + std::to_string(prices[i].timestamp));
    }
  }

  const std::int64_t first = -detail::floor_div(-prices.front().timestamp, grid_step) * grid_step;
  const std::int64_t last = detail::floor_div(prices.back().timestamp, grid_step) * grid_step;
  std::size_t cursor = 0;
  double prev_log = 0.0;
  for (std::int64_t g = first; g <= last; g += grid_step) {
    while (cursor + 1 < prices.size() && prices[cursor + 1].timestamp <= g) ++cursor;
    const bool observed = prices[cursor].timestamp > g - grid_step;
    const double lp = std::log(prices[cursor].price);
    if (g != first) {
      out.end_times.push_back(g);
      out.values.push_back(100.0 * (lp - prev_log));
      out.filled.push_back(!observed);
    }
    prev_log = lp;
  }
  return out;
}

/// Cuts grid returns into complete days of T = 86400 / grid_step points. The
/// first return of a day spans from the previous day's closing grid price.
inline DailyReturns compute_returns(const std::vector<PricePoint>& prices, const ReturnOptions& opt = {}) {
  require(opt.grid_step > 0 && kSecondsPerDay % opt.grid_step == 0, ErrorCode::PreconditionViolation,
          "grid_step must divide 86400 seconds");
  const FlatReturns flat = compute_flat_returns(prices, opt.grid_step, opt.fill);
  const int points = static_cast<int>(kSecondsPerDay / opt.grid_step);
  const std::int64_t offset = opt.day_offset_steps * opt.grid_step;

  DailyReturns out;
  out.grid_step = opt.grid_step;
  out.day_offset_steps = opt.day_offset_steps;
  out.fill = opt.fill;
  const std::vector<double> grid = day_grid(points);

  std::size_t i = 0;
  const std::size_t n = flat.values.size();
  bool saw_partial_head = false;
  while (i < n) {
    const std::int64_t start = flat.end_times[i] - opt.grid_step;
    const std::int64_t day_start =
        detail::floor_div(start - offset, kSecondsPerDay) * kSecondsPerDay + offset;
    if (start != day_start) {
      saw_partial_head = true;
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(points) > n) break;
    ReturnCurve c;
    c.day_index = static_cast<int>(out.curves.size()) + 1;
    c.day_start = day_start;
    c.grid = grid;
    c.values.assign(flat.values.begin() + static_cast<std::ptrdiff_t>(i),
                    flat.values.begin() + static_cast<std::ptrdiff_t>(i) + points);
    int filled = 0;
    for (int t = 0; t < points; ++t) filled += flat.filled[i + static_cast<std::size_t>(t)] ? 1 : 0;
    require(filled < points, ErrorCode::EmptyDay,
            "no observed price in day starting at " + std::to_string(day_start));
    out.filled_points += filled;
    out.curves.push_back(std::move(c));
    i += static_cast<std::size_t>(points);
  }
  out.dropped_days = (saw_partial_head ? 1 : 0) + (i < n ? 1 : 0);
  require(!out.curves.empty(), ErrorCode::EmptyDay, "no complete day in the price series");
  return out;
}

struct ReturnCurvePanel {
  std::vector<ReturnCurve> curves;
  bool demeaned = false;
  std::vector<double> mean_curve;  // non-empty iff demeaned
  std::int64_t grid_step = 0;

  int N() const { return static_cast<int>(curves.size()); }
  int T() const { return curves.empty() ? 0 : static_cast<int>(curves.front().values.size()); }
  const std::vector<double>& grid() const { return curves.front().grid; }

  Mat matrix() const {
    Mat x(N(), T());
    for (int i = 0; i < N(); ++i)
      for (int t = 0; t < T(); ++t) x(i, t) = curves[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(t)];
    return x;
  }
};

inline void validate_panel(const ReturnCurvePanel& p) {
  require(!p.curves.empty(), ErrorCode::PreconditionViolation, "panel has no curves");
  const auto& g = p.curves.front().grid;
  require(!g.empty(), ErrorCode::PreconditionViolation, "panel grid is empty");
  for (std::size_t t = 1; t < g.size(); ++t)
    require(g[t] > g[t - 1], ErrorCode::PreconditionViolation, "grid must be strictly increasing");
  for (const auto& c : p.curves) {
    require(c.values.size() == g.size() && c.grid == g, ErrorCode::PreconditionViolation,
            "curves must share one grid");
  }
}

inline ReturnCurvePanel make_panel(std::vector<ReturnCurve> curves, std::int64_t grid_step = 0) {
  ReturnCurvePanel p;
  p.curves = std::move(curves);
  p.grid_step = grid_step;
  validate_panel(p);
  return p;
}

inline ReturnCurvePanel make_panel(const DailyReturns& d) { return make_panel(d.curves, d.grid_step); }

/// Builds a panel from an N x T matrix with grid t/T and sequential day indices.
inline ReturnCurvePanel panel_from_matrix(const Mat& x, std::int64_t grid_step = 0) {
  const std::vector<double> grid = day_grid(static_cast<int>(x.cols()));
  std::vector<ReturnCurve> curves(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto& c = curves[static_cast<std::size_t>(i)];
    c.day_index = static_cast<int>(i) + 1;
    c.grid = grid;
    c.values.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index t = 0; t < x.cols(); ++t) c.values[static_cast<std::size_t>(t)] = x(i, t);
  }
  return make_panel(std::move(curves), grid_step);
}

inline ReturnCurvePanel demean_panel(const ReturnCurvePanel& panel) {
  require(!panel.demeaned, ErrorCode::AlreadyDemeaned, "panel is already demeaned");
  validate_panel(panel);
  const Mat x = panel.matrix();
  const Vec mean = x.colwise().mean().transpose();
  ReturnCurvePanel out = panel;
  for (auto& c : out.curves)
    for (std::size_t t = 0; t < c.values.size(); ++t) c.values[t] -= mean(static_cast<Eigen::Index>(t));
  out.demeaned = true;
  out.mean_curve = to_std(mean);
  return out;
}

/// Sub-panel of days [first, first + count), carrying raw (un-demeaned) values.
inline ReturnCurvePanel slice_panel(const ReturnCurvePanel& panel, int first, int count) {
  require(!panel.demeaned, ErrorCode::AlreadyDemeaned, "slice_panel expects a raw panel");
  require(first >= 0 && count >= 0 && first + count <= panel.N(), ErrorCode::IndexOutOfRange,
          "slice outside the panel");
  ReturnCurvePanel out;
  out.grid_step = panel.grid_step;
  out.curves.assign(panel.curves.begin() + first, panel.curves.begin() + first + count);
  return out;
}

}  // namespace funcast
