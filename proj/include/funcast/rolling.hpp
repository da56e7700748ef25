#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "funcast/curves.hpp"
#include "funcast/error.hpp"
#include "funcast/eval.hpp"
#include "funcast/fpca.hpp"
#include "funcast/linalg.hpp"
#include "funcast/parallel.hpp"

namespace funcast {

/// Two panels cut from one flat return sequence. Target rows are whole days;
/// aux rows are the same days shifted back by k steps, plus the current
/// (incomplete) day whose observed prefix ends its aux curve.
struct ShiftedPanelPair {
  int T = 0;
  int k = 0;
  Mat target_raw;      // (N-1) x T
  Mat aux_raw;         // N x T
  Vec target_mean;     // T, divisor N-1
  Vec aux_mean;        // T, divisor N
  ReturnCurvePanel target_panel;  // demeaned
  ReturnCurvePanel aux_panel;     // demeaned

  int N() const { return static_cast<int>(aux_raw.rows()); }
  int overlap() const { return T - k; }
};

/// `returns` ends at the last observed return of the current day, which has
/// T - k observations so far.
inline ShiftedPanelPair build_shifted_panels(const Vec& returns, int T, int k, int n_days) {
  require(T >= 2, ErrorCode::PreconditionViolation, "T must be at least 2");
  require(k >= 1 && k < T, ErrorCode::BadHorizon, "horizon k must satisfy 1 <= k < T");
  require(n_days >= 4, ErrorCode::PreconditionViolation, "need at least 4 days");
  const Eigen::Index len = returns.size();
  require(len >= static_cast<Eigen::Index>(n_days) * T, ErrorCode::InsufficientData,
          "not enough returns for the requested number of days");

  ShiftedPanelPair p;
  p.T = T;
  p.k = k;
  p.aux_raw.resize(n_days, T);
  p.target_raw.resize(n_days - 1, T);
  const Eigen::Index s_last = len - (T - k);
  for (int i = 0; i < n_days; ++i) {
    const Eigen::Index s = s_last - static_cast<Eigen::Index>(n_days - 1 - i) * T;
    p.aux_raw.row(i) = returns.segment(s - k, T).transpose();
    if (i + 1 < n_days) p.target_raw.row(i) = returns.segment(s, T).transpose();
  }
  p.aux_mean = p.aux_raw.colwise().mean().transpose();
  p.target_mean = p.target_raw.colwise().mean().transpose();
  p.aux_panel = demean_panel(panel_from_matrix(p.aux_raw));
  p.target_panel = demean_panel(panel_from_matrix(p.target_raw));
  return p;
}

// ---------------------------------------------------------------------------
// Cross-basis score regression

enum class Estimator { OLS, RIDGE, LASSO };

constexpr std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::OLS: return "ols";
    case Estimator::RIDGE: return "ridge";
    case Estimator::LASSO: return "lasso";
  }
  return "unknown";
}

inline Estimator parse_estimator(std::string_view s) {
  for (Estimator e : {Estimator::OLS, Estimator::RIDGE, Estimator::LASSO})
    if (s == to_string(e)) return e;
  throw Error(ErrorCode::ConfigInvalid, "unknown estimator '" + std::string(s) + "'");
}

inline double default_penalty(Estimator e) {
  switch (e) {
    case Estimator::RIDGE: return 1e-2;
    case Estimator::LASSO: return 1e-3;
    default: return 0.0;
  }
}

struct CrossRegressionFit {
  Mat coefs;      // J_alpha x J_beta, column j predicts beta_{.j}
  Vec intercept;  // J_beta, never penalised
  Estimator estimator = Estimator::OLS;
  double penalty = 0.0;
  Vec r2;         // J_beta

  Vec predict(const Vec& alpha_row) const { return intercept + coefs.transpose() * alpha_row; }
};

namespace detail {

/// Coefficients on standardised regressors (columns with zero spread get 0).
/// Ridge: (Z'Z/n + lambda I) b = Z'y/n. Lasso: coordinate descent on
/// (1/2n)|y - Zb|^2 + lambda |b|_1. Both act on centred y and Z.
inline Mat penalised_coefs(const Mat& z, const Mat& y, Estimator est, double lambda) {
  const Eigen::Index n = z.rows(), p = z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (est == Estimator::RIDGE) {
    const Mat g = z.transpose() * z * inv_n + lambda * Mat::Identity(p, p);
    return g.ldlt().solve(z.transpose() * y * inv_n);
  }
  Mat b = Mat::Zero(p, y.cols());
  const Vec zz = z.colwise().squaredNorm().transpose() * inv_n;
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    Vec r = y.col(c);
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double max_delta = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (zz(j) <= 0.0) continue;
        const double old = b(j, c);
        const double rho = z.col(j).dot(r) * inv_n + zz(j) * old;
        const double next = std::copysign(std::max(std::abs(rho) - lambda, 0.0), rho) / zz(j);
        if (next != old) {
          r -= (next - old) * z.col(j);
          b(j, c) = next;
          max_delta = std::max(max_delta, std::abs(next - old));
        }
      }
      if (max_delta < 1e-13) break;
    }
  }
  return b;
}

}  // namespace detail

/// Regresses each beta column on all alpha columns with an intercept. The
/// penalised estimators standardise alpha (divisor n) and report coefficients
/// on the original scale.
inline CrossRegressionFit fit_cross_regression(const Mat& alpha, const Mat& beta, Estimator est, double penalty) {
  require(alpha.rows() == beta.rows(), ErrorCode::LengthMismatch, "alpha and beta row counts differ");
  require(alpha.cols() >= 1 && beta.cols() >= 1, ErrorCode::PreconditionViolation, "need J >= 1");
  require(alpha.rows() >= 2, ErrorCode::PreconditionViolation, "need at least 2 rows");
  require(penalty >= 0.0, ErrorCode::PreconditionViolation, "penalty must be nonnegative");
  const Eigen::Index n = alpha.rows(), p = alpha.cols();

  CrossRegressionFit fit;
  fit.estimator = est;
  fit.penalty = est == Estimator::OLS ? 0.0 : penalty;
  const Vec x_mean = alpha.colwise().mean().transpose();
  const Vec y_mean = beta.colwise().mean().transpose();
  const Mat xc = alpha.rowwise() - x_mean.transpose();
  const Mat yc = beta.rowwise() - y_mean.transpose();

  if (est == Estimator::OLS) {
    Mat design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = alpha;
    Eigen::ColPivHouseholderQR<Mat> qr(design);
    qr.setThreshold(1e-12);
    require(qr.rank() == p + 1, ErrorCode::SingularDesign, "alpha scores are collinear");
    const Mat coef = qr.solve(beta);
    fit.intercept = coef.row(0).transpose();
    fit.coefs = coef.bottomRows(p);
  } else {
    Vec sd = (xc.colwise().squaredNorm().transpose() / static_cast<double>(n)).cwiseSqrt();
    Mat z = xc;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (sd(j) > 0.0) z.col(j) /= sd(j);
      else z.col(j).setZero();
    }
    const Mat b = detail::penalised_coefs(z, yc, est, fit.penalty);
    fit.coefs = Mat::Zero(p, beta.cols());
    for (Eigen::Index j = 0; j < p; ++j)
      if (sd(j) > 0.0) fit.coefs.row(j) = b.row(j) / sd(j);
    fit.intercept = y_mean - fit.coefs.transpose() * x_mean;
  }

  const Mat resid = beta - ((alpha * fit.coefs).rowwise() + fit.intercept.transpose());
  fit.r2.resize(beta.cols());
  for (Eigen::Index c = 0; c < beta.cols(); ++c) {
    const double sst = yc.col(c).squaredNorm();
    const double ssr = resid.col(c).squaredNorm();
    fit.r2(c) = sst > 0.0 ? 1.0 - ssr / sst : (ssr == 0.0 ? 1.0 : 0.0);
  }
  return fit;
}

/// k-fold cross-validation over `grid` (contiguous folds, no shuffling).
inline double select_penalty_cv(const Mat& alpha, const Mat& beta, Estimator est, const std::vector<double>& grid,
                                int folds = 5) {
  require(!grid.empty(), ErrorCode::PreconditionViolation, "empty penalty grid");
  const Eigen::Index n = alpha.rows();
  require(folds >= 2 && n >= 2 * folds, ErrorCode::PreconditionViolation, "too few rows for cross-validation");
  double best = grid.front(), best_err = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double err = 0.0;
    for (int f = 0; f < folds; ++f) {
      const Eigen::Index lo = n * f / folds, hi = n * (f + 1) / folds;
      Mat xa(n - (hi - lo), alpha.cols()), ya(n - (hi - lo), beta.cols());
      xa << alpha.topRows(lo), alpha.bottomRows(n - hi);
      ya << beta.topRows(lo), beta.bottomRows(n - hi);
      const auto fit = fit_cross_regression(xa, ya, est, lambda);
      for (Eigen::Index i = lo; i < hi; ++i)
        err += (beta.row(i).transpose() - fit.predict(alpha.row(i).transpose())).squaredNorm();
    }
    if (err < best_err) {
      best_err = err;
      best = lambda;
    }
  }
  return best;
}

/// 20 log-spaced penalties from 1e-5 to 10.
inline std::vector<double> default_penalty_grid() {
  std::vector<double> g;
  for (int i = 0; i < 20; ++i) g.push_back(std::pow(10.0, -5.0 + 6.0 * i / 19.0));
  return g;
}

// ---------------------------------------------------------------------------
// Forecasting the tail of the current day

struct RollingOptions {
  double delta = 0.85;
  Estimator estimator = Estimator::RIDGE;
  std::optional<double> penalty;  // unset: default for the estimator, or CV when cv is true
  bool cv = false;
};

struct RollingForecast {
  Vec tail;        // k values: forecasts of the unobserved end of the current day
  Vec full_curve;  // T
  int J = 0;
  Vec beta_tilde;
  CrossRegressionFit regression;
};

inline RollingForecast rolling_forecast(const ShiftedPanelPair& pair, const RollingOptions& opt = {}) {
  FpcaOptions fo;
  fo.delta = opt.delta;
  const FpcaBasis aux = fit_fpca(pair.aux_panel, fo);
  const FpcaBasis target = fit_fpca(pair.target_panel, fo);
  const int j = std::min(aux.J, target.j_max());
  const int n = pair.N();

  const Mat alpha = aux.scores.leftCols(j).topRows(n - 1);
  const Mat beta = target.scores.leftCols(j);
  double penalty = opt.penalty.value_or(default_penalty(opt.estimator));
  if (opt.cv && opt.estimator != Estimator::OLS && !opt.penalty)
    penalty = select_penalty_cv(alpha, beta, opt.estimator, default_penalty_grid());

  RollingForecast out;
  out.J = j;
  out.regression = fit_cross_regression(alpha, beta, opt.estimator, penalty);
  out.beta_tilde = out.regression.predict(aux.scores.row(n - 1).head(j).transpose());
  out.full_curve = target.eigenfunctions.leftCols(j) * out.beta_tilde + pair.target_mean;
  out.tail = out.full_curve.tail(pair.k);
  return out;
}

/// Mean per-response R^2 of the cross regression for each horizon in k_values,
/// always using the last n_days days of `returns`.
struct HorizonPoint {
  int k = 0;
  double mean_r2 = 0.0;
  int J = 0;
};

inline std::vector<HorizonPoint> horizon_diagnostic(const Vec& returns, int T, const std::vector<int>& k_values,
                                                    int n_days, const RollingOptions& opt = {}) {
  std::vector<HorizonPoint> out;
  for (int k : k_values) {
    require(k >= 1 && k <= T - 1, ErrorCode::BadHorizon, "k outside [1, T-1]");
    const auto fc = rolling_forecast(build_shifted_panels(returns, T, k, n_days), opt);
    out.push_back({k, fc.regression.r2.mean(), fc.J});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rolling-origin evaluation

struct RollingBacktestConfig {
  int T = 24;
  int k = 1;
  int window = 100;      // days per panel
  int n_forecasts = 200;
  int stride = 1;        // returns between consecutive origins
  long first_origin = -1;  // flat index of the first forecast target; -1 puts the block at the end
  int threads = 0;
  RollingOptions model{};
};

struct RollingPoint {
  long origin = 0;  // flat index of the first forecast return
  int step = 1;     // 1..k
  double forecast = 0.0;
  double realized = 0.0;
};

struct RollingBacktestResult {
  int window = 0;
  std::vector<RollingPoint> points;
  double rmse = 0.0;
  double mae = 0.0;
  double sign_rate = 0.0;
};

inline RollingBacktestResult rolling_origin_backtest(const Vec& returns, const RollingBacktestConfig& cfg) {
  require(cfg.n_forecasts >= 1 && cfg.stride >= 1, ErrorCode::ConfigInvalid, "n_forecasts and stride must be >= 1");
  require(cfg.k >= 1 && cfg.k < cfg.T, ErrorCode::BadHorizon, "horizon k must satisfy 1 <= k < T");
  const long len = static_cast<long>(returns.size());
  const long span = static_cast<long>(cfg.n_forecasts - 1) * cfg.stride;
  const long first = cfg.first_origin >= 0 ? cfg.first_origin : len - cfg.k - span;
  require(first + span + cfg.k <= len, ErrorCode::InsufficientData, "forecast block runs past the data");
  require(first >= static_cast<long>(cfg.window) * cfg.T, ErrorCode::InsufficientData,
          "not enough history before the first origin");

  std::vector<RollingForecast> fcs(static_cast<std::size_t>(cfg.n_forecasts));
  parallel_for(fcs.size(), cfg.threads, [&](std::size_t m) {
    const long origin = first + static_cast<long>(m) * cfg.stride;
    fcs[m] = rolling_forecast(build_shifted_panels(returns.head(origin), cfg.T, cfg.k, cfg.window), cfg.model);
  });

  RollingBacktestResult res;
  res.window = cfg.window;
  std::vector<double> f, x;
  for (int m = 0; m < cfg.n_forecasts; ++m) {
    const long origin = first + static_cast<long>(m) * cfg.stride;
    for (int s = 0; s < cfg.k; ++s) {
      const double fv = fcs[static_cast<std::size_t>(m)].tail(s);
      const double xv = returns(origin + s);
      res.points.push_back({origin, s + 1, fv, xv});
      f.push_back(fv);
      x.push_back(xv);
    }
  }
  res.rmse = rmse(to_vec(f), to_vec(x));
  res.mae = mae(to_vec(f), to_vec(x));
  res.sign_rate = sign_rate(to_vec(f), to_vec(x));
  return res;
}

struct WindowTuning {
  std::vector<RollingBacktestResult> candidates;
  int best_window = 0;
};

/// Tries every window in [lo, hi] on the same origins; the best has the highest
/// sign rate, ties broken by lower RMSE, then by the smaller window.
inline WindowTuning tune_window(const Vec& returns, RollingBacktestConfig cfg, int lo, int hi) {
  require(lo >= 4 && lo <= hi, ErrorCode::ConfigInvalid, "bad window range");
  if (cfg.first_origin < 0) {
    const long span = static_cast<long>(cfg.n_forecasts - 1) * cfg.stride;
    cfg.first_origin = static_cast<long>(returns.size()) - cfg.k - span;
  }
  WindowTuning out;
  for (int w = lo; w <= hi; ++w) {
    cfg.window = w;
    out.candidates.push_back(rolling_origin_backtest(returns, cfg));
  }
  const RollingBacktestResult* best = &out.candidates.front();
  for (const auto& c : out.candidates) {
    if (c.sign_rate > best->sign_rate || (c.sign_rate == best->sign_rate && c.rmse < best->rmse)) best = &c;
  }
  out.best_window = best->window;
  return out;
}

}  // namespace funcast
