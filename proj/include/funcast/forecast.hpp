#pragma once

#include <algorithm>
#include <cmath>
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
#include "funcast/score_models.hpp"

namespace funcast {

enum class Method { ARGARCH, ARMA_AUE, VAR_SBEKK, VAR_AUE };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::ARGARCH: return "argarch";
    case Method::ARMA_AUE: return "arma_aue";
    case Method::VAR_SBEKK: return "var_sbekk";
    case Method::VAR_AUE: return "var_aue";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::ARGARCH, Method::ARMA_AUE, Method::VAR_SBEKK, Method::VAR_AUE})
    if (s == to_string(m)) return m;
  throw Error(ErrorCode::ConfigInvalid, "unknown method '" + std::string(s) + "'");
}

struct FunctionalForecast {
  Vec point;
  Vec lower;
  Vec upper;
  double level = 0.95;
  Method method = Method::ARGARCH;
  Vec score_forecasts;  // J
  Mat score_variances;  // J x J
};

/// Point curve mu + Xi b and Gaussian pointwise bands from the quadratic form
/// xi(t)' S xi(t) plus the truncation variance omega(t).
inline FunctionalForecast forecast_curve(const FpcaBasis& basis, const Vec& score_fc, const Mat& score_cov,
                                         double level, Method method) {
  const int j = basis.J;
  require(score_fc.size() == j, ErrorCode::LengthMismatch, "score forecast length differs from J");
  require(score_cov.rows() == j && score_cov.cols() == j, ErrorCode::LengthMismatch,
          "score covariance is not J x J");
  require(is_psd(score_cov), ErrorCode::NonPsdCov, "score covariance is not symmetric PSD");
  const double z = normal_two_sided_quantile(level);
  const Mat xi = basis.retained();
  const Mat s = 0.5 * (score_cov + score_cov.transpose());

  FunctionalForecast f;
  f.level = level;
  f.method = method;
  f.score_forecasts = score_fc;
  f.score_variances = s;
  f.point = basis.mean_curve + xi * score_fc;
  const Vec var = ((xi * s).cwiseProduct(xi).rowwise().sum() + basis.omega).cwiseMax(0.0);
  const Vec half = z * var.cwiseSqrt();
  f.lower = f.point - half;
  f.upper = f.point + half;
  return f;
}

/// Fits one AR(1)-GARCH(1,1) per retained score column.
inline std::vector<ArGarchFit> fit_argarch_scores(const FpcaBasis& basis, const ArGarchOptions& opt = {}) {
  std::vector<ArGarchFit> fits;
  fits.reserve(static_cast<std::size_t>(basis.J));
  for (int j = 0; j < basis.J; ++j) fits.push_back(fit_ar_garch(basis.scores.col(j), opt));
  return fits;
}

inline FunctionalForecast forecast_argarch_day(const FpcaBasis& basis, const std::vector<ArGarchFit>& fits,
                                               double level) {
  require(static_cast<int>(fits.size()) == basis.J, ErrorCode::LengthMismatch, "need one AR-GARCH fit per score");
  Vec mean(basis.J);
  Mat cov = Mat::Zero(basis.J, basis.J);
  for (int j = 0; j < basis.J; ++j) {
    const ScoreForecast sf = forecast_ar_garch(fits[static_cast<std::size_t>(j)]);
    mean(j) = sf.mean;
    cov(j, j) = sf.variance;
  }
  return forecast_curve(basis, mean, cov, level, Method::ARGARCH);
}

inline FunctionalForecast forecast_sbekk_day(const FpcaBasis& basis, const VarFit& var_fit, const SbekkFit& bekk_fit,
                                             double level) {
  return forecast_curve(basis, forecast_var1(var_fit), forecast_sbekk(bekk_fit), level, Method::VAR_SBEKK);
}

// ---------------------------------------------------------------------------
// In-sample error bands

enum class ScoreForecaster { ARMA, VAR };

/// How Step 2 obtains the one-step score forecasts for k = J+1..N-1.
enum class AueRefit {
  Expanding,   // refit the score model on scores 1..k for each k
  FullSample,  // fit once on all N scores and use its in-sample one-step predictions
};

struct AueOptions {
  AueRefit refit = AueRefit::Expanding;
  double kappa_max = 6.0;
  double kappa_step = 0.01;
  ArmaOptions arma{};
};

struct AueBands {
  FunctionalForecast forecast;
  double kappa_lower = 0.0;
  double kappa_upper = 0.0;
  Vec gamma;              // T
  Mat errors;             // (N-J-1) x T in-sample curve errors
  double in_sample_coverage = 1.0;
  bool infeasible = false;  // no grid pair reached the level; kappa_max used
  int fallback_steps = 0;   // Step-2 origins that used the running score mean
};

namespace detail {

/// One-step score forecast from the first k rows using a freshly fitted model.
/// Origins too short for the model, or where it fails, use the running mean.
inline Vec score_forecast_prefix(const Mat& scores, Eigen::Index k, ScoreForecaster fc, const ArmaOptions& arma,
                                 bool& fallback) {
  const Mat head = scores.topRows(k);
  fallback = false;
  try {
    if (fc == ScoreForecaster::VAR) {
      if (k >= head.cols() + 2) return forecast_var1(fit_var1(head));
    } else if (k >= 30) {
      Vec out(head.cols());
      for (Eigen::Index j = 0; j < head.cols(); ++j) out(j) = forecast_arma(fit_arma_auto(head.col(j), arma), 1)(0);
      return out;
    }
  } catch (const Error& e) {
    if (kind_of(e.code()) == ErrorKind::Config) throw;
  }
  fallback = true;
  return head.colwise().mean().transpose();
}

struct KappaChoice {
  int lower = 0;
  int upper = 0;
  double coverage = 1.0;
  bool infeasible = false;
};

/// Joint grid search over (kappa_lower, kappa_upper) in steps of `step` up to
/// `max`, minimising the sum subject to coverage >= level. Ties prefer the most
/// symmetric pair, then the smaller lower multiplier.
inline KappaChoice search_kappa(const Mat& errors, const Vec& gamma, double level, double step, double max) {
  std::vector<double> u;
  Eigen::Index always_inside = 0;
  for (Eigen::Index r = 0; r < errors.rows(); ++r) {
    for (Eigen::Index t = 0; t < errors.cols(); ++t) {
      if (gamma(t) > 0.0) u.push_back(errors(r, t) / gamma(t));
      else ++always_inside;  // gamma = 0 forces every error at t to be 0
    }
  }
  std::sort(u.begin(), u.end());
  const double total = static_cast<double>(u.size() + static_cast<std::size_t>(always_inside));
  const int steps = static_cast<int>(std::lround(max / step));
  auto inside = [&](int lo, int hi) {
    const auto a = std::lower_bound(u.begin(), u.end(), -lo * step);
    const auto b = std::upper_bound(u.begin(), u.end(), hi * step);
    return static_cast<double>(b - a) + static_cast<double>(always_inside);
  };
  const double need = level * total - 1e-9 * total;

  KappaChoice best;
  best.infeasible = true;
  int best_sum = 2 * steps + 1;
  for (int lo = 0; lo <= steps; ++lo) {
    if (inside(lo, steps) < need) continue;
    int a = 0, b = steps;  // smallest hi reaching the level
    while (a < b) {
      const int mid = (a + b) / 2;
      if (inside(lo, mid) >= need) b = mid;
      else a = mid + 1;
    }
    const int sum = lo + a;
    const bool better = sum < best_sum ||
                        (sum == best_sum && std::abs(lo - a) < std::abs(best.lower - best.upper));
    if (better) {
      best = {lo, a, 0.0, false};
      best_sum = sum;
    }
  }
  if (best.infeasible) best = {steps, steps, 0.0, true};
  best.coverage = total > 0.0 ? inside(best.lower, best.upper) / total : 1.0;
  return best;
}

}  // namespace detail

/// Constant-multiplier bands built from in-sample one-step curve errors.
/// `panel` must be the demeaned panel the basis was fitted on.
inline AueBands aue_bands(const ReturnCurvePanel& panel, const FpcaBasis& basis, ScoreForecaster forecaster,
                          double level, const AueOptions& opt = {}) {
  require(panel.demeaned, ErrorCode::NotDemeaned, "aue_bands expects the demeaned panel");
  const Eigen::Index n = panel.N();
  const int j = basis.J;
  require(basis.N() == n, ErrorCode::LengthMismatch, "basis and panel sizes differ");
  require(n > j + 2, ErrorCode::InsufficientHistory, "in-sample bands need N > J + 2");
  require(opt.kappa_step > 0.0 && opt.kappa_max > 0.0, ErrorCode::PreconditionViolation, "bad kappa grid");

  const Mat x = panel.matrix();
  const Mat scores = basis.scores.leftCols(j);
  const Mat xi = basis.retained();

  AueBands out;
  const Eigen::Index m = n - 1 - j;  // k = J+1..N-1
  out.errors.resize(m, x.cols());
  Mat score_err(m, j);

  std::vector<ArmaFit> arma_full;
  std::optional<VarFit> var_full;
  auto fit_full = [&] {
    if (forecaster == ScoreForecaster::VAR) {
      var_full = fit_var1(scores);
    } else {
      for (int c = 0; c < j; ++c) arma_full.push_back(fit_arma_auto(scores.col(c), opt.arma));
    }
  };
  fit_full();

  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index k = j + 1 + r;  // origin: scores 1..k known, forecast k+1 (row k)
    Vec b_hat(j);
    if (opt.refit == AueRefit::Expanding) {
      bool fb = false;
      b_hat = detail::score_forecast_prefix(scores, k, forecaster, opt.arma, fb);
      out.fallback_steps += fb ? 1 : 0;
    } else if (forecaster == ScoreForecaster::VAR) {
      b_hat = forecast_var1(*var_full, scores.row(k - 1).transpose());
    } else {
      for (int c = 0; c < j; ++c) b_hat(c) = arma_fitted(arma_full[static_cast<std::size_t>(c)])(k);
    }
    score_err.row(r) = scores.row(k) - b_hat.transpose();
    out.errors.row(r) = x.row(k) - (xi * b_hat).transpose();
  }

  const double divisor = static_cast<double>((n - 1) - (j + 1));
  out.gamma = (out.errors.colwise().squaredNorm().transpose() / divisor).cwiseSqrt();
  const auto kc = detail::search_kappa(out.errors, out.gamma, level, opt.kappa_step, opt.kappa_max);
  out.kappa_lower = kc.lower * opt.kappa_step;
  out.kappa_upper = kc.upper * opt.kappa_step;
  out.in_sample_coverage = kc.coverage;
  out.infeasible = kc.infeasible;

  Vec b_next(j);
  if (forecaster == ScoreForecaster::VAR) {
    b_next = forecast_var1(*var_full);
  } else {
    for (int c = 0; c < j; ++c) b_next(c) = forecast_arma(arma_full[static_cast<std::size_t>(c)], 1)(0);
  }
  auto& f = out.forecast;
  f.level = level;
  f.method = forecaster == ScoreForecaster::VAR ? Method::VAR_AUE : Method::ARMA_AUE;
  f.score_forecasts = b_next;
  f.score_variances = score_err.transpose() * score_err / static_cast<double>(m);
  f.point = basis.mean_curve + xi * b_next;
  f.lower = f.point - out.kappa_lower * out.gamma;
  f.upper = f.point + out.kappa_upper * out.gamma;
  return out;
}

// ---------------------------------------------------------------------------
// Rolling one-day-ahead backtest

struct BacktestConfig {
  int window = 250;
  int horizon_days = 10;
  int start_day = -1;  // 0-based index of the first forecast day; -1 means `window`
  double delta = 0.85;
  std::vector<Method> methods{Method::ARGARCH, Method::ARMA_AUE, Method::VAR_SBEKK, Method::VAR_AUE};
  double level = 0.95;
  int threads = 0;
  AueOptions aue{};
  GridWeight weight = GridWeight::Unit;
};

/// All requested forecasts for the day after a training panel (raw, not demeaned).
inline std::vector<FunctionalForecast> forecast_next_day(const ReturnCurvePanel& train, double delta,
                                                         const std::vector<Method>& methods, double level,
                                                         const AueOptions& aue = {},
                                                         GridWeight weight = GridWeight::Unit) {
  const ReturnCurvePanel dm = demean_panel(train);
  FpcaOptions fo;
  fo.delta = delta;
  fo.weight = weight;
  const FpcaBasis basis = fit_fpca(dm, fo);
  const Mat scores = basis.scores.leftCols(basis.J);

  std::optional<VarFit> var_fit;
  std::vector<FunctionalForecast> out;
  for (Method m : methods) {
    switch (m) {
      case Method::ARGARCH:
        out.push_back(forecast_argarch_day(basis, fit_argarch_scores(basis), level));
        break;
      case Method::ARMA_AUE:
        out.push_back(aue_bands(dm, basis, ScoreForecaster::ARMA, level, aue).forecast);
        break;
      case Method::VAR_SBEKK: {
        if (!var_fit) var_fit = fit_var1(scores);
        const SbekkFit bekk = fit_sbekk(var_fit->residuals);
        out.push_back(forecast_sbekk_day(basis, *var_fit, bekk, level));
        break;
      }
      case Method::VAR_AUE:
        out.push_back(aue_bands(dm, basis, ScoreForecaster::VAR, level, aue).forecast);
        break;
    }
  }
  return out;
}

/// Refits on the trailing `window` curves before each evaluation day and scores
/// every method against the realised curve. A day on which any method fails is
/// skipped and recorded. When `forecasts` is given it receives the scored days
/// in (day, method) order.
inline BacktestReport rolling_backtest(const ReturnCurvePanel& raw, const BacktestConfig& cfg,
                                       std::vector<EvaluatedDay>* forecasts = nullptr) {
  require(!raw.demeaned, ErrorCode::AlreadyDemeaned, "rolling_backtest expects a raw panel");
  require(cfg.window >= 3, ErrorCode::ConfigInvalid, "window must be at least 3");
  require(cfg.horizon_days >= 0, ErrorCode::ConfigInvalid, "horizon_days must be nonnegative");
  require(!cfg.methods.empty(), ErrorCode::ConfigInvalid, "no methods requested");
  const int start = cfg.start_day >= 0 ? cfg.start_day : cfg.window;
  BacktestReport empty;
  empty.level = cfg.level;
  if (cfg.horizon_days == 0) return empty;
  require(start >= cfg.window, ErrorCode::InsufficientData, "start day leaves less than one window of history");
  require(start + cfg.horizon_days <= raw.N(), ErrorCode::InsufficientData,
          "panel shorter than window + horizon_days");

  struct DaySlot {
    std::vector<EvaluatedDay> rows;
    std::string failure;
  };
  std::vector<DaySlot> slots(static_cast<std::size_t>(cfg.horizon_days));
  parallel_for(slots.size(), cfg.threads, [&](std::size_t i) {
    const int day = start + static_cast<int>(i);
    auto& slot = slots[i];
    try {
      const auto fcs = forecast_next_day(slice_panel(raw, day - cfg.window, cfg.window), cfg.delta, cfg.methods,
                                         cfg.level, cfg.aue, cfg.weight);
      const Vec realized = to_vec(raw.curves[static_cast<std::size_t>(day)].values);
      for (const auto& f : fcs)
        slot.rows.push_back({day, std::string(to_string(f.method)), f.point, f.lower, f.upper, realized});
    } catch (const Error& e) {
      if (kind_of(e.code()) == ErrorKind::Config) throw;
      slot.rows.clear();
      slot.failure = "day " + std::to_string(day) + ": " + e.what();
    }
  });

  std::vector<EvaluatedDay> all;
  std::vector<std::string> failures;
  for (auto& s : slots) {
    if (!s.failure.empty()) failures.push_back(s.failure);
    for (auto& r : s.rows) all.push_back(std::move(r));
  }
  BacktestReport rep = all.empty() ? empty : build_report(all, cfg.level);
  rep.failed_days = static_cast<int>(failures.size());
  rep.failures = std::move(failures);
  if (forecasts) *forecasts = std::move(all);
  return rep;
}

}  // namespace funcast
