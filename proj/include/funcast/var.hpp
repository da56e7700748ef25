#pragma once

#include <string>
#include <vector>

#include "funcast/error.hpp"
#include "funcast/linalg.hpp"

namespace funcast {

/// beta_i = intercept + Pi1 beta_{i-1} + eps_i
struct VarFit {
  Mat pi1;            // J x J
  Vec intercept;      // J
  Mat residuals;      // (N-1) x J
  Mat sigma_resid;    // J x J, divisor N-1
  Mat marginal_cov;   // J x J sample covariance of the scores
  Vec last_obs;       // beta_N
  double spectral_radius = 0.0;
  std::vector<std::string> warnings;
};

/// Equation-by-equation least squares of beta_i on (1, beta_{i-1}).
inline VarFit fit_var1(const Mat& scores) {
  const Eigen::Index n = scores.rows();
  const Eigen::Index j = scores.cols();
  require(j >= 1, ErrorCode::PreconditionViolation, "fit_var1 needs at least one score column");
  require(n >= j + 2, ErrorCode::PreconditionViolation, "fit_var1 needs N >= J + 2");

  Mat design(n - 1, j + 1);
  design.col(0).setOnes();
  design.rightCols(j) = scores.topRows(n - 1);
  const Mat target = scores.bottomRows(n - 1);

  Eigen::ColPivHouseholderQR<Mat> qr(design);
  qr.setThreshold(1e-12);
  require(qr.rank() == j + 1, ErrorCode::SingularRegressor, "lagged scores are collinear");
  const Mat coef = qr.solve(target);  // (J+1) x J

  VarFit fit;
  fit.intercept = coef.row(0).transpose();
  fit.pi1 = coef.bottomRows(j).transpose();
  fit.residuals = target - design * coef;
  fit.sigma_resid = fit.residuals.transpose() * fit.residuals / static_cast<double>(n - 1);
  fit.sigma_resid = 0.5 * (fit.sigma_resid + fit.sigma_resid.transpose());
  fit.marginal_cov = sample_covariance(scores);
  fit.last_obs = scores.row(n - 1).transpose();
  fit.spectral_radius = spectral_radius(fit.pi1);
  if (fit.spectral_radius >= 1.0)
    fit.warnings.push_back("VAR(1) coefficient matrix has spectral radius >= 1");
  return fit;
}

inline Vec forecast_var1(const VarFit& fit, const Vec& last) { return fit.intercept + fit.pi1 * last; }

inline Vec forecast_var1(const VarFit& fit) { return forecast_var1(fit, fit.last_obs); }

/// Iterated means for steps 1..horizon, one column per step.
inline Mat forecast_var1_path(const VarFit& fit, int horizon) {
  Mat out(fit.intercept.size(), horizon);
  Vec cur = fit.last_obs;
  for (int h = 0; h < horizon; ++h) {
    cur = forecast_var1(fit, cur);
    out.col(h) = cur;
  }
  return out;
}

}  // namespace funcast
