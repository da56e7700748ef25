#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "funcast/funcast.hpp"

using namespace funcast;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected funcast::Error";
  return ErrorCode::PreconditionViolation;
}

Vec garch_series(double ar, double c, double arch, double garch, int n, std::uint64_t seed) {
  UnivArGarchDynamics d;
  d.ar = Vec::Constant(1, ar);
  d.var_const = Vec::Constant(1, c);
  d.arch = Vec::Constant(1, arch);
  d.garch = Vec::Constant(1, garch);
  std::mt19937_64 rng(seed);
  return simulate_scores(d, 1, n, 500, rng).scores.col(0);
}

Mat var_series(const Mat& pi, int n, std::uint64_t seed) {
  LinearVarDynamics d;
  d.pi = pi;
  ScoreDynamics dyn = d;
  enforce_unit_variance(dyn);
  std::mt19937_64 rng(seed);
  return simulate_scores(dyn, static_cast<int>(pi.rows()), n, 200, rng).scores;
}

}  // namespace

TEST(Optim, BfgsMinimisesRosenbrock) {
  auto f = optim::with_numeric_gradient([](const Vec& x) {
    return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
  });
  Vec x0(2);
  x0 << -1.2, 1.0;
  optim::BfgsOptions o;
  o.max_iter = 2000;
  const auto r = optim::minimize_bfgs(f, x0, o);
  EXPECT_NEAR(r.x(0), 1.0, 1e-4);
  EXPECT_NEAR(r.x(1), 1.0, 1e-4);
}

TEST(ArGarch, LoglikGradientMatchesFiniteDifferences) {
  const Vec y = garch_series(0.4, 0.1, 0.1, 0.8, 400, 1);
  ArGarchParams p{0.05, 0.3, 0.2, 0.15, 0.7};
  Vec g;
  const double ll = ar_garch_loglik(p, y, 0.6, &g);
  EXPECT_TRUE(std::isfinite(ll));
  double* fields[5] = {&p.mu, &p.ar, &p.var_const, &p.arch, &p.garch};
  for (int k = 0; k < 5; ++k) {
    const double keep = *fields[k], h = 1e-6;
    *fields[k] = keep + h;
    const double up = ar_garch_loglik(p, y, 0.6);
    *fields[k] = keep - h;
    const double dn = ar_garch_loglik(p, y, 0.6);
    *fields[k] = keep;
    EXPECT_NEAR(g(k), (up - dn) / (2.0 * h), 1e-4 * std::max(1.0, std::abs(g(k)))) << "parameter " << k;
  }
}

TEST(ArGarch, FitRecoversParameters) {
  const Vec y = garch_series(0.5, 0.05, 0.1, 0.8, 5000, 2);
  const ArGarchFit fit = fit_ar_garch(y);
  EXPECT_TRUE(fit.params.valid());
  EXPECT_NEAR(fit.params.ar, 0.5, 0.05);
  EXPECT_NEAR(fit.params.arch, 0.1, 0.05);
  EXPECT_NEAR(fit.params.garch, 0.8, 0.1);
  EXPECT_NEAR(fit.params.mu, 0.0, 0.05);
  EXPECT_EQ(fit.cond_var.size(), y.size());
  EXPECT_DOUBLE_EQ(fit.last_obs, y(y.size() - 1));
}

TEST(ArGarch, ForecastUsesRecursion) {
  ArGarchFit fit;
  fit.params = {0.1, 0.5, 0.2, 0.1, 0.7};
  fit.last_obs = 2.0;
  fit.cond_var = Vec::Constant(3, 1.5);
  fit.residuals = Vec::Constant(3, -1.0);
  const ScoreForecast f = forecast_ar_garch(fit);
  EXPECT_DOUBLE_EQ(f.mean, 0.1 + 0.5 * 2.0);
  EXPECT_DOUBLE_EQ(f.variance, 0.2 + 0.1 * 1.0 + 0.7 * 1.5);
}

TEST(ArGarch, RejectsShortOrConstantSeries) {
  EXPECT_EQ(code_of([] { fit_ar_garch(Vec::Ones(10)); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([] { fit_ar_garch(Vec::Ones(100)); }), ErrorCode::DegenerateSeries);
}

TEST(ArGarch, UnitVarianceReport) {
  ArGarchFit fit;
  fit.params = {0.0, 0.5, 0.75 * 0.1, 0.1, 0.8};  // (1 - a^2)(1 - zeta - varsigma)
  fit.series_variance = 1.0;
  const auto r = check_unit_variance_constraints(fit);
  EXPECT_TRUE(r.satisfied());
  EXPECT_NEAR(r.implied_variance, 1.0, 1e-12);
  fit.params.var_const = 0.2;
  EXPECT_FALSE(check_unit_variance_constraints(fit).satisfied());
}

TEST(Arma, PacfMapGivesStationaryAr) {
  Vec pacf(2);
  pacf << 0.5, -0.3;
  const Vec phi = pacf_to_ar(pacf);
  // Durbin-Levinson: phi_2 = -0.3, phi_1 = 0.5 - (-0.3)(0.5)
  EXPECT_NEAR(phi(1), -0.3, 1e-15);
  EXPECT_NEAR(phi(0), 0.5 + 0.3 * 0.5, 1e-15);
}

TEST(Arma, RecoversAr1AndForecasts) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Vec y(3000);
  y(0) = 0.0;
  for (int i = 1; i < 3000; ++i) y(i) = 1.0 + 0.6 * y(i - 1) + z(rng);
  ArmaOptions o;
  o.p_max = 1;
  o.q_max = 0;
  const ArmaFit fit = fit_arma_auto(y, o);
  ASSERT_EQ(fit.p, 1);
  EXPECT_NEAR(fit.ar_coefs(0), 0.6, 0.04);
  EXPECT_NEAR(fit.intercept / (1.0 - fit.ar_coefs(0)), 2.5, 0.1);
  const Vec f = forecast_arma(fit, 2);
  EXPECT_NEAR(f(0), fit.intercept + fit.ar_coefs(0) * y(2999), 1e-12);
  EXPECT_NEAR(f(1), fit.intercept + fit.ar_coefs(0) * f(0), 1e-12);
  const Vec fitted = arma_fitted(fit);
  EXPECT_NEAR(fitted(10), fit.intercept + fit.ar_coefs(0) * y(9), 1e-10);
}

TEST(Arma, WhiteNoisePrefersLowOrder) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  Vec y(2000);
  for (auto& v : y) v = z(rng);
  const ArmaFit fit = fit_arma_auto(y);
  EXPECT_LE(fit.p + fit.q, 1);
  EXPECT_NEAR(fit.innov_var, 1.0, 0.1);
}

TEST(Var, RecoversCoefficientMatrix) {
  Mat pi(2, 2);
  pi << 0.5, 0.2, -0.1, 0.3;
  const Mat s = var_series(pi, 5000, 5);
  const VarFit fit = fit_var1(s);
  EXPECT_LT((fit.pi1 - pi).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT(fit.spectral_radius, 1.0);
  EXPECT_EQ(fit.residuals.rows(), 4999);
  const Vec f = forecast_var1(fit);
  EXPECT_LT((f - (fit.intercept + fit.pi1 * s.row(4999).transpose())).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Var, CollinearScoresAreSingular) {
  Mat s(20, 2);
  for (int i = 0; i < 20; ++i) s.row(i) << i % 3, 2.0 * (i % 3);
  EXPECT_EQ(code_of([&] { fit_var1(s); }), ErrorCode::SingularRegressor);
  EXPECT_EQ(code_of([&] { fit_var1(Mat::Ones(3, 2)); }), ErrorCode::PreconditionViolation);
}

TEST(Sbekk, LoglikRejectsIndefiniteH) {
  Mat r = Mat::Zero(5, 2);
  r(0, 0) = 1.0;
  Mat bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_EQ(sbekk_loglik(r, bad, 0.0, 0.0, Mat::Identity(2, 2)), -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isfinite(sbekk_loglik(r, Mat::Identity(2, 2), 0.1, 0.8, Mat::Identity(2, 2))));
}

TEST(Sbekk, ForecastFollowsRecursion) {
  SbekkFit f;
  f.c = Mat::Identity(2, 2) * 0.5;
  f.a = 0.1;
  f.g = 0.8;
  f.last_resid = Vec(2);
  f.last_resid << 1.0, -2.0;
  f.h_path = {Mat::Identity(2, 2) * 2.0};
  const Mat h = forecast_sbekk(f);
  Mat expect = 0.25 * Mat::Identity(2, 2) + 0.1 * f.last_resid * f.last_resid.transpose() + 1.6 * Mat::Identity(2, 2);
  EXPECT_LT((h - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Sbekk, FitRecoversPersistence) {
  VarSbekkDynamics d;
  d.pi = Mat::Zero(2, 2);
  d.a = 0.08;
  d.g = 0.9;
  ScoreDynamics dyn = d;
  enforce_unit_variance(dyn);
  std::mt19937_64 rng(7);
  const auto sc = simulate_scores(dyn, 2, 4000, 500, rng);
  const SbekkFit fit = fit_sbekk(fit_var1(sc.scores).residuals);
  EXPECT_NEAR(fit.a, 0.08, 0.05);
  EXPECT_NEAR(fit.g, 0.90, 0.05);
  EXPECT_EQ(static_cast<int>(fit.h_path.size()), 3999);
  for (const auto& h : fit.h_path) ASSERT_EQ(Eigen::LLT<Mat>(h).info(), Eigen::Success);
  // variance targeting: C C' = (1 - a - g) times the sample covariance
  EXPECT_LT((fit.cct() - (1.0 - fit.a - fit.g) * fit.sample_cov).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Sbekk, UnitVarianceReportForSimulatedTruth) {
  VarFit vf;
  vf.pi1 = Mat::Zero(2, 2);
  vf.pi1.diagonal() << 0.3, 0.2;
  vf.marginal_cov = Mat::Identity(2, 2);
  SbekkFit bf;
  bf.a = 0.08;
  bf.g = 0.9;
  bf.c = Eigen::LLT<Mat>(0.02 * (Mat::Identity(2, 2) - vf.pi1 * vf.pi1.transpose())).matrixL();
  EXPECT_TRUE(check_unit_variance_constraints(vf, bf).satisfied(1e-12));
  bf.g = 0.5;
  EXPECT_FALSE(check_unit_variance_constraints(vf, bf).satisfied());
}
