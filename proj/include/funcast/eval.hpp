#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "funcast/error.hpp"
#include "funcast/linalg.hpp"

namespace funcast {

namespace detail {
inline void check_lengths(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), ErrorCode::LengthMismatch, "forecast and realized lengths differ");
  require(a.size() >= 1, ErrorCode::LengthMismatch, "empty input");
}
inline void check_bounds(const Vec& lb, const Vec& ub, const Vec& x) {
  require(lb.size() == ub.size() && lb.size() == x.size(), ErrorCode::LengthMismatch,
          "bound and realized lengths differ");
  require(lb.size() >= 1, ErrorCode::LengthMismatch, "empty input");
  for (Eigen::Index i = 0; i < lb.size(); ++i)
    require(lb(i) <= ub(i), ErrorCode::InvalidBounds, "lower bound exceeds upper bound");
}
}  // namespace detail

inline double rmse(const Vec& forecast, const Vec& realized) {
  detail::check_lengths(forecast, realized);
  return std::sqrt((forecast - realized).squaredNorm() / static_cast<double>(forecast.size()));
}

inline double mae(const Vec& forecast, const Vec& realized) {
  detail::check_lengths(forecast, realized);
  return (forecast - realized).cwiseAbs().mean();
}

/// Fraction of matching signs. A zero forecast only matches a zero outcome.
inline double sign_rate(const Vec& forecast, const Vec& realized) {
  detail::check_lengths(forecast, realized);
  auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  int hits = 0;
  for (Eigen::Index i = 0; i < forecast.size(); ++i) hits += sgn(forecast(i)) == sgn(realized(i)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(forecast.size());
}

/// Interval score of a central (1 - alpha) interval at a single point.
inline double interval_score(double lb, double ub, double realized, double alpha) {
  require(lb <= ub, ErrorCode::InvalidBounds, "lower bound exceeds upper bound");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::PreconditionViolation, "alpha must lie in (0,1)");
  double s = ub - lb;
  if (realized < lb) s += 2.0 / alpha * (lb - realized);
  if (realized > ub) s += 2.0 / alpha * (realized - ub);
  return s;
}

inline Vec interval_scores(const Vec& lb, const Vec& ub, const Vec& realized, double alpha) {
  detail::check_bounds(lb, ub, realized);
  Vec s(lb.size());
  for (Eigen::Index i = 0; i < lb.size(); ++i) s(i) = interval_score(lb(i), ub(i), realized(i), alpha);
  return s;
}

inline double mean_interval_score(const Vec& lb, const Vec& ub, const Vec& realized, double alpha) {
  return interval_scores(lb, ub, realized, alpha).mean();
}

inline double coverage_rate(const Vec& lb, const Vec& ub, const Vec& realized) {
  detail::check_bounds(lb, ub, realized);
  int inside = 0;
  for (Eigen::Index i = 0; i < lb.size(); ++i) inside += (lb(i) <= realized(i) && realized(i) <= ub(i)) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(lb.size());
}

enum class DmLoss { Squared, Absolute };

struct DieboldMariano {
  double statistic = 0.0;
  double p_value = 1.0;
  int lag = 0;
};

/// Equal-accuracy test on the loss differential L(e_a) - L(e_b) with a Bartlett
/// (Newey-West) long-run variance. max_lag < 0 selects floor(n^(1/3)).
inline DieboldMariano diebold_mariano(const Vec& errors_a, const Vec& errors_b, DmLoss loss = DmLoss::Squared,
                                      int max_lag = -1) {
  require(errors_a.size() == errors_b.size(), ErrorCode::LengthMismatch, "error series lengths differ");
  const Eigen::Index n = errors_a.size();
  require(n >= 10, ErrorCode::PreconditionViolation, "Diebold-Mariano needs at least 10 observations");
  const Vec d = loss == DmLoss::Squared ? Vec(errors_a.array().square() - errors_b.array().square())
                                        : Vec(errors_a.array().abs() - errors_b.array().abs());
  DieboldMariano out;
  out.lag = max_lag >= 0 ? max_lag : static_cast<int>(std::floor(std::cbrt(static_cast<double>(n))));
  out.lag = std::min<int>(out.lag, static_cast<int>(n) - 1);
  const double mean = d.mean();
  const Vec c = d.array() - mean;
  double lrv = c.squaredNorm() / static_cast<double>(n);
  for (int l = 1; l <= out.lag; ++l) {
    const double gamma = c.head(n - l).dot(c.tail(n - l)) / static_cast<double>(n);
    lrv += 2.0 * (1.0 - static_cast<double>(l) / (out.lag + 1.0)) * gamma;
  }
  if (d.cwiseAbs().maxCoeff() == 0.0) return {0.0, 1.0, out.lag};
  if (!(lrv > 0.0)) {
    out.statistic = mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
    return out;
  }
  out.statistic = mean / std::sqrt(lrv / static_cast<double>(n));
  out.p_value = 2.0 * (1.0 - normal_cdf(std::abs(out.statistic)));
  return out;
}

struct AcfResult {
  Vec values;        // lags 0..max_lag
  double band = 0.0; // 1.96 / sqrt(n)
};

inline AcfResult acf(const Vec& series, int max_lag) {
  const Eigen::Index n = series.size();
  require(max_lag >= 0 && n > max_lag, ErrorCode::SeriesTooShort, "series shorter than max_lag + 1");
  const Vec c = series.array() - series.mean();
  const double c0 = c.squaredNorm();
  AcfResult r;
  r.values = Vec::Zero(max_lag + 1);
  r.band = 1.96 / std::sqrt(static_cast<double>(n));
  if (c0 == 0.0) return r;
  for (int l = 0; l <= max_lag; ++l) r.values(l) = c.head(n - l).dot(c.tail(n - l)) / c0;
  r.values(0) = 1.0;
  return r;
}

struct CrossAcfResult {
  std::vector<int> lags;  // -max_lag..max_lag
  Vec values;             // corr(a_{t+lag}, b_t)
  double band = 0.0;
};

inline CrossAcfResult cross_acf(const Vec& a, const Vec& b, int max_lag) {
  require(a.size() == b.size(), ErrorCode::LengthMismatch, "cross_acf series lengths differ");
  const Eigen::Index n = a.size();
  require(max_lag >= 0 && n > max_lag, ErrorCode::SeriesTooShort, "series shorter than max_lag + 1");
  const Vec ca = a.array() - a.mean();
  const Vec cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  CrossAcfResult r;
  r.band = 1.96 / std::sqrt(static_cast<double>(n));
  r.values = Vec::Zero(2 * max_lag + 1);
  for (int l = -max_lag; l <= max_lag; ++l) {
    r.lags.push_back(l);
    if (denom == 0.0) continue;
    const Eigen::Index k = std::abs(l);
    const double s = l >= 0 ? ca.tail(n - k).dot(cb.head(n - k)) : ca.head(n - k).dot(cb.tail(n - k));
    r.values(l + max_lag) = s / denom;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Backtest reporting

/// One method's forecast of one day, with the realised curve.
struct EvaluatedDay {
  int day = 0;
  std::string method;
  Vec point, lower, upper, realized;
};

struct DayRecord {
  int day = 0;
  std::string method;
  double rmse = 0.0;
  double mae = 0.0;
  double sign_rate = 0.0;
  double mean_interval_score = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;
};

struct MethodAggregate {
  std::string method;
  double rmse = 0.0;
  double mae = 0.0;
  double sign_rate = 0.0;
  double mean_interval_score = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;
  int n_points = 0;
  int n_days = 0;
};

struct DmRecord {
  std::string method_a;
  std::string method_b;
  double statistic = 0.0;
  double p_value = 1.0;
};

struct BacktestReport {
  double level = 0.95;
  std::vector<DayRecord> per_day;
  std::vector<MethodAggregate> aggregates;
  std::vector<DmRecord> dm_tests;
  int failed_days = 0;
  std::vector<std::string> failures;
};

/// Scores each day and pools all points per method. Methods keep their first
/// appearance order; DM tests run over every pair on days both methods cover.
inline BacktestReport build_report(const std::vector<EvaluatedDay>& days, double level) {
  const double alpha = 1.0 - level;
  BacktestReport rep;
  rep.level = level;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvaluatedDay*>> by_method;
  for (const auto& d : days) {
    if (!by_method.count(d.method)) order.push_back(d.method);
    by_method[d.method].push_back(&d);
    DayRecord r;
    r.day = d.day;
    r.method = d.method;
    r.rmse = rmse(d.point, d.realized);
    r.mae = mae(d.point, d.realized);
    r.sign_rate = sign_rate(d.point, d.realized);
    r.mean_interval_score = mean_interval_score(d.lower, d.upper, d.realized, alpha);
    r.coverage = coverage_rate(d.lower, d.upper, d.realized);
    r.mean_width = (d.upper - d.lower).mean();
    rep.per_day.push_back(r);
  }

  auto pooled = [](const std::vector<const EvaluatedDay*>& v, auto member) {
    Eigen::Index total = 0;
    for (const auto* d : v) total += (d->*member).size();
    Vec out(total);
    Eigen::Index k = 0;
    for (const auto* d : v) {
      out.segment(k, (d->*member).size()) = d->*member;
      k += (d->*member).size();
    }
    return out;
  };

  for (const auto& m : order) {
    const auto& v = by_method[m];
    const Vec p = pooled(v, &EvaluatedDay::point);
    const Vec lo = pooled(v, &EvaluatedDay::lower);
    const Vec hi = pooled(v, &EvaluatedDay::upper);
    const Vec x = pooled(v, &EvaluatedDay::realized);
    MethodAggregate a;
    a.method = m;
    a.rmse = rmse(p, x);
    a.mae = mae(p, x);
    a.sign_rate = sign_rate(p, x);
    a.mean_interval_score = mean_interval_score(lo, hi, x, alpha);
    a.coverage = coverage_rate(lo, hi, x);
    a.mean_width = (hi - lo).mean();
    a.n_points = static_cast<int>(p.size());
    a.n_days = static_cast<int>(v.size());
    rep.aggregates.push_back(a);
  }

  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t k = i + 1; k < order.size(); ++k) {
      std::map<int, const EvaluatedDay*> other;
      for (const auto* d : by_method[order[k]]) other[d->day] = d;
      std::vector<double> ea, eb;
      for (const auto* d : by_method[order[i]]) {
        auto it = other.find(d->day);
        if (it == other.end()) continue;
        for (Eigen::Index t = 0; t < d->point.size(); ++t) {
          ea.push_back(d->realized(t) - d->point(t));
          eb.push_back(it->second->realized(t) - it->second->point(t));
        }
      }
      if (ea.size() < 10) continue;
      const auto dm = diebold_mariano(to_vec(ea), to_vec(eb));
      rep.dm_tests.push_back({order[i], order[k], dm.statistic, dm.p_value});
    }
  }
  return rep;
}

}  // namespace funcast
