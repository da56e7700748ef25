#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "funcast/funcast.hpp"
#include "funcast/io.hpp"

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

Mat random_matrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = z(rng);
  return m;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("funcast_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

KlFactorSpec small_spec(ScoreDynamics dyn, std::uint64_t seed) {
  KlFactorSpec s;
  s.J0 = 2;
  s.T = 6;
  s.mean_curve = Vec::Zero(6);
  s.eigenfunctions = make_orthonormal_basis(6, 2, seed);
  s.lambdas = Vec::Ones(2);
  s.dynamics = std::move(dyn);
  s.noise_sigma2 = 0.1;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(ShiftedPanels, LayoutAndOverlap) {
  const Vec r = Vec::LinSpaced(100, 0.0, 99.0);  // value equals flat index
  const auto p = build_shifted_panels(r, 10, 3, 5);
  EXPECT_EQ(p.N(), 5);
  EXPECT_EQ(p.target_raw.rows(), 4);
  EXPECT_EQ(p.overlap(), 7);
  // the current day holds 7 returns: indices 93..99, so its aux curve is 90..99
  EXPECT_DOUBLE_EQ(p.aux_raw(4, 0), 90.0);
  EXPECT_DOUBLE_EQ(p.aux_raw(4, 9), 99.0);
  EXPECT_DOUBLE_EQ(p.target_raw(3, 0), 83.0);
  EXPECT_DOUBLE_EQ(p.aux_raw(3, 0), 80.0);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(p.aux_raw.row(i).tail(7), p.target_raw.row(i).head(7));
  EXPECT_NEAR(p.aux_mean(0), (50.0 + 60.0 + 70.0 + 80.0 + 90.0) / 5.0, 1e-12);
  EXPECT_NEAR(p.target_mean(0), (53.0 + 63.0 + 73.0 + 83.0) / 4.0, 1e-12);
}

TEST(ShiftedPanels, Validation) {
  const Vec r = Vec::Zero(50);
  EXPECT_EQ(code_of([&] { build_shifted_panels(r, 10, 0, 4); }), ErrorCode::BadHorizon);
  EXPECT_EQ(code_of([&] { build_shifted_panels(r, 10, 10, 4); }), ErrorCode::BadHorizon);
  EXPECT_EQ(code_of([&] { build_shifted_panels(r, 10, 2, 6); }), ErrorCode::InsufficientData);
  EXPECT_EQ(code_of([&] { build_shifted_panels(r, 10, 2, 3); }), ErrorCode::PreconditionViolation);
}

TEST(CrossRegression, OlsIsExactOnLinearData) {
  const Mat a = random_matrix(40, 3, 1);
  Mat coef(3, 2);
  coef << 1.0, -0.5, 0.2, 0.0, 0.3, 2.0;
  Vec icpt(2);
  icpt << 0.7, -1.1;
  const Mat b = (a * coef).rowwise() + icpt.transpose();
  const auto fit = fit_cross_regression(a, b, Estimator::OLS, 0.0);
  EXPECT_LT((fit.coefs - coef).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((fit.intercept - icpt).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(fit.r2.minCoeff(), 1.0, 1e-12);
}

TEST(CrossRegression, PenaltiesShrink) {
  const Mat a = random_matrix(60, 3, 2);
  const Mat b = a * random_matrix(3, 2, 3) + 0.2 * random_matrix(60, 2, 4);
  const auto ols = fit_cross_regression(a, b, Estimator::OLS, 0.0);
  const auto small = fit_cross_regression(a, b, Estimator::RIDGE, 0.01);
  const auto big = fit_cross_regression(a, b, Estimator::RIDGE, 10.0);
  EXPECT_LT(big.coefs.norm(), small.coefs.norm());
  EXPECT_LT(small.coefs.norm(), ols.coefs.norm() + 1e-12);
  EXPECT_LT((fit_cross_regression(a, b, Estimator::LASSO, 0.0).coefs - ols.coefs).cwiseAbs().maxCoeff(), 1e-8);

  const auto dead = fit_cross_regression(a, b, Estimator::LASSO, 100.0);
  EXPECT_EQ(dead.coefs.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((dead.intercept - b.colwise().mean().transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossRegression, LassoSatisfiesKktConditions) {
  const Mat a = random_matrix(80, 4, 5);
  const Mat b = a.col(0) * 2.0 + 0.5 * random_matrix(80, 1, 6);
  const double lambda = 0.3;
  const auto fit = fit_cross_regression(a, b, Estimator::LASSO, lambda);
  // standardised design: z_j = (a_j - mean) / sd, sd with divisor n
  const Mat xc = a.rowwise() - a.colwise().mean();
  const Vec sd = (xc.colwise().squaredNorm() / 80.0).cwiseSqrt().transpose();
  const Vec resid = (b.col(0).array() - b.col(0).mean()).matrix() - xc * fit.coefs.col(0);
  for (int j = 0; j < 4; ++j) {
    const double grad = xc.col(j).dot(resid) / sd(j) / 80.0;
    const double bj = fit.coefs(j, 0) * sd(j);
    if (bj != 0.0) EXPECT_NEAR(grad, lambda * (bj > 0 ? 1.0 : -1.0), 1e-9);
    else EXPECT_LE(std::abs(grad), lambda + 1e-9);
  }
  EXPECT_NE(fit.coefs(0, 0), 0.0);
}

TEST(CrossRegression, Errors) {
  Mat a = random_matrix(20, 2, 7);
  a.col(1) = 3.0 * a.col(0);
  EXPECT_EQ(code_of([&] { fit_cross_regression(a, a, Estimator::OLS, 0.0); }), ErrorCode::SingularDesign);
  EXPECT_EQ(code_of([&] { fit_cross_regression(a, a.topRows(5), Estimator::OLS, 0.0); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(parse_estimator("lasso"), Estimator::LASSO);
  EXPECT_EQ(code_of([] { parse_estimator("elastic"); }), ErrorCode::ConfigInvalid);
}

TEST(CrossRegression, CvPicksFromGrid) {
  const Mat a = random_matrix(50, 3, 8);
  const Mat b = a * random_matrix(3, 2, 9) + random_matrix(50, 2, 10);
  const auto grid = default_penalty_grid();
  ASSERT_EQ(grid.size(), 20u);
  EXPECT_NEAR(grid.front(), 1e-5, 1e-18);
  EXPECT_NEAR(grid.back(), 10.0, 1e-12);
  const double lam = select_penalty_cv(a, b, Estimator::RIDGE, grid);
  EXPECT_NE(std::find(grid.begin(), grid.end(), lam), grid.end());
  EXPECT_LT(lam, 1.0);  // strong signal, little shrinkage wanted
}

TEST(Rolling, WhiteNoiseHasNoDirectionalSkill) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  Vec r(24 * 300);
  for (auto& v : r) v = z(rng);
  RollingBacktestConfig cfg;
  cfg.T = 24;
  cfg.k = 1;
  cfg.window = 40;
  cfg.n_forecasts = 400;
  cfg.threads = 1;
  cfg.model.estimator = Estimator::OLS;
  const auto res = rolling_origin_backtest(r, cfg);
  EXPECT_EQ(res.points.size(), 400u);
  EXPECT_NEAR(res.sign_rate, 0.5, 0.08);
  // at the longest horizon the shifted panels barely overlap
  const auto h = horizon_diagnostic(r, 24, {23}, 100, cfg.model);
  EXPECT_LT(h[0].mean_r2, 0.2);
  EXPECT_EQ(code_of([&] { horizon_diagnostic(r, 24, {24}, 100); }), ErrorCode::BadHorizon);
}

TEST(Rolling, ForecastShapesAndWindowTuning) {
  const Vec r = random_matrix(24 * 60, 1, 12).col(0);
  const auto fc = rolling_forecast(build_shifted_panels(r, 24, 4, 30));
  EXPECT_EQ(fc.tail.size(), 4);
  EXPECT_EQ(fc.full_curve.size(), 24);
  EXPECT_EQ(fc.tail, fc.full_curve.tail(4));
  EXPECT_EQ(fc.regression.estimator, Estimator::RIDGE);
  EXPECT_DOUBLE_EQ(fc.regression.penalty, 1e-2);

  RollingBacktestConfig cfg;
  cfg.k = 2;
  cfg.n_forecasts = 20;
  cfg.stride = 3;
  const auto tuned = tune_window(r, cfg, 10, 13);
  ASSERT_EQ(tuned.candidates.size(), 4u);
  const auto& best = *std::find_if(tuned.candidates.begin(), tuned.candidates.end(),
                                   [&](const auto& c) { return c.window == tuned.best_window; });
  for (const auto& c : tuned.candidates) EXPECT_LE(c.sign_rate, best.sign_rate);
  // every candidate was scored on the same origins
  for (const auto& c : tuned.candidates) EXPECT_EQ(c.points.front().origin, tuned.candidates[0].points.front().origin);
}

TEST(Sim, BasesAreOrthonormal) {
  for (BasisKind kind : {BasisKind::Random, BasisKind::Fourier}) {
    const Mat b = make_orthonormal_basis(24, 5, 3, kind);
    EXPECT_LT((b.transpose() * b - Mat::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
  }
  const Mat f = make_orthonormal_basis(24, 2, 0, BasisKind::Fourier);
  EXPECT_LT((f.col(0).array() - 1.0 / std::sqrt(24.0)).abs().maxCoeff(), 1e-14);
  EXPECT_EQ(code_of([] { make_orthonormal_basis(3, 4, 0); }), ErrorCode::InvalidSpec);
}

TEST(Sim, UnitVarianceEnforcementForEveryDynamics) {
  LinearVarDynamics lin;
  lin.pi = Mat::Zero(2, 2);
  lin.pi << 0.5, 0.1, 0.0, 0.3;
  VarSbekkDynamics bekk;
  bekk.pi = lin.pi;
  bekk.a = 0.05;
  bekk.g = 0.9;
  UnivArGarchDynamics garch;
  garch.ar = Vec::Constant(2, 0.4);
  garch.arch = Vec::Constant(2, 0.1);
  garch.garch = Vec::Constant(2, 0.8);
  garch.var_const = Vec::Ones(2);
  for (ScoreDynamics dyn : {ScoreDynamics(lin), ScoreDynamics(bekk), ScoreDynamics(garch)}) {
    enforce_unit_variance(dyn);
    std::mt19937_64 rng(13);
    const auto sc = simulate_scores(dyn, 2, 200000, 500, rng);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(sample_variance(sc.scores.col(j)), 1.0, 0.05) << dyn.index();
  }
  UnivArGarchDynamics g1 = garch;
  ScoreDynamics d1 = g1;
  enforce_unit_variance(d1);
  EXPECT_NEAR(std::get<UnivArGarchDynamics>(d1).var_const(0), (1.0 - 0.16) * 0.1, 1e-15);
}

TEST(Sim, PanelIsReproducibleAndNoiseIsOrthogonal) {
  LinearVarDynamics lin;
  lin.pi = 0.5 * Mat::Identity(2, 2);
  lin.sigma = 0.75 * Mat::Identity(2, 2);
  const auto spec = small_spec(lin, 21);
  const auto a = simulate_panel(spec, 50, 100);
  const auto b = simulate_panel(spec, 50, 100);
  EXPECT_EQ(a.panel.matrix(), b.panel.matrix());
  EXPECT_LT((a.noise * spec.eigenfunctions).cwiseAbs().maxCoeff(), 1e-12);
  const Mat rebuilt = a.true_scores * spec.eigenfunctions.transpose() + a.noise;
  EXPECT_LT((rebuilt - a.panel.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  auto other = spec;
  other.seed = 22;
  EXPECT_NE(simulate_panel(other, 50, 100).panel.matrix(), a.panel.matrix());
}

TEST(Sim, ScoreDependenceMatchesDynamics) {
  LinearVarDynamics lin;
  lin.pi = Mat::Zero(2, 2);
  lin.pi.diagonal() << 0.6, 0.2;
  VarSbekkDynamics bekk;
  bekk.pi = lin.pi;
  bekk.a = 0.1;
  bekk.g = 0.85;
  ScoreDynamics dl = lin, db = bekk;
  enforce_unit_variance(dl);
  enforce_unit_variance(db);
  std::mt19937_64 r1(41), r2(42);
  const Mat sl = simulate_scores(dl, 2, 50000, 500, r1).scores;
  const Mat sb = simulate_scores(db, 2, 50000, 500, r2).scores;
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(acf(sl.col(j), 1).values(1), lin.pi(j, j), 0.02);
    EXPECT_NEAR(acf(sb.col(j), 1).values(1), lin.pi(j, j), 0.03);
  }
  const Vec sq_lin = sl.col(0).array().square();
  const Vec sq_bekk = sb.col(0).array().square();
  // squared AR(1) scores carry pi^2 autocorrelation; sBEKK adds conditional heteroscedasticity on top
  EXPECT_NEAR(acf(sq_lin, 1).values(1), 0.36, 0.03);
  EXPECT_GT(acf(sq_bekk, 1).values(1), 0.36 + 0.05);
}

TEST(Sim, NoiseFreePanelRecoversEigenstructure) {
  LinearVarDynamics lin;
  lin.pi = Mat::Zero(3, 3);
  lin.sigma = Mat::Identity(3, 3);
  KlFactorSpec s;
  s.J0 = 3;
  s.T = 24;
  s.mean_curve = Vec::Zero(24);
  s.eigenfunctions = make_orthonormal_basis(24, 3, 5);
  s.lambdas = Vec(3);
  s.lambdas << 3.0, 2.0, 1.0;
  s.dynamics = lin;
  s.seed = 6;
  const auto sim = simulate_panel(s, 5000);
  const auto b = fit_fpca(demean_panel(sim.panel));
  EXPECT_NEAR(b.eigenvalues.tail(21).cwiseAbs().maxCoeff(), 0.0, 1e-10);
  // noise free: the estimated axes are the basis rotated by the eigenvectors of the sample score covariance
  const Mat sc = sim.true_scores.rowwise() - sim.true_scores.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Mat> es(sc.transpose() * sc / 5000.0);
  for (int j = 0; j < 3; ++j) {
    const Vec expect = s.eigenfunctions * es.eigenvectors().col(2 - j);
    EXPECT_NEAR(b.eigenvalues(j), es.eigenvalues()(2 - j), 1e-10);
    EXPECT_NEAR(std::abs(b.eigenfunctions.col(j).dot(expect)), 1.0, 1e-10);
    EXPECT_NEAR(b.eigenvalues(j), s.lambdas(j), 0.1 * s.lambdas(j));
  }
}

TEST(Sim, SpecValidation) {
  VarSbekkDynamics bekk;
  bekk.pi = Mat::Zero(2, 2);
  bekk.c = Mat::Identity(2, 2);
  bekk.a = 0.5;
  bekk.g = 0.6;
  EXPECT_EQ(code_of([&] { validate_spec(small_spec(bekk, 1)); }), ErrorCode::InvalidSpec);
  bekk.g = 0.3;
  EXPECT_EQ(code_of([&] { simulate_panel(small_spec(bekk, 1), 10, 50); }), ErrorCode::InvalidSpec);
  LinearVarDynamics lin;
  lin.pi = 1.2 * Mat::Identity(2, 2);
  lin.sigma = Mat::Identity(2, 2);
  EXPECT_EQ(code_of([&] { validate_spec(small_spec(lin, 1)); }), ErrorCode::InvalidSpec);
  auto s = small_spec(bekk, 1);
  s.eigenfunctions(0, 0) += 0.1;
  EXPECT_EQ(code_of([&] { validate_spec(s); }), ErrorCode::InvalidSpec);
}

TEST(Io, TimestampsRoundTrip) {
  EXPECT_EQ(io::parse_timestamp("1970-01-02T00:00:00Z"), 86400);
  EXPECT_EQ(io::parse_timestamp("2022-01-01 01:30"), 1641000600);
  EXPECT_EQ(io::parse_timestamp("1640995200"), 1640995200);
  EXPECT_EQ(io::format_timestamp(1641000600), "2022-01-01T01:30:00Z");
  EXPECT_EQ(io::parse_timestamp(io::format_timestamp(1700000123)), 1700000123);
  EXPECT_EQ(code_of([] { io::parse_timestamp("2022-01-01T00:00:00+02:00"); }), ErrorCode::IoError);
  EXPECT_EQ(code_of([] { io::parse_timestamp("yesterday"); }), ErrorCode::IoError);
}

TEST(Io, PricesAndPanelsRoundTrip) {
  const auto dir = temp_dir("io");
  {
    std::ofstream out(dir / "prices.csv");
    out << "timestamp,price\n";
    for (int i = 0; i <= 48; ++i) out << io::format_timestamp(3600 * i) << "," << 100.0 + i << "\n";
  }
  const auto px = io::read_prices_csv(dir / "prices.csv");
  ASSERT_EQ(px.size(), 49u);
  EXPECT_EQ(px[3].timestamp, 3 * 3600);
  const auto panel = make_panel(compute_returns(px));
  io::write_panel(panel, dir / "panel.csv", {{"source", "test"}});
  const auto back = io::read_panel(dir / "panel.csv");
  EXPECT_EQ(back.N(), panel.N());
  EXPECT_EQ(back.grid_step, 3600);
  EXPECT_LT((back.matrix() - panel.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(back.curves[1].day_start, 86400);
  EXPECT_EQ(code_of([&] { io::read_panel(dir / "missing.csv"); }), ErrorCode::IoError);
  {
    std::ofstream out(dir / "mixed.csv");
    out << "timestamp,price\n0,100\n1970-01-01T01:00:00Z,101\n";
  }
  EXPECT_EQ(code_of([&] { io::read_prices_csv(dir / "mixed.csv"); }), ErrorCode::IoError);
  std::filesystem::remove_all(dir);
}

TEST(Io, JsonViews) {
  const Mat m = random_matrix(3, 2, 30);
  EXPECT_EQ(io::mat_from_json(io::to_json(m)), m);
  const auto basis = fit_fpca(demean_panel(panel_from_matrix(random_matrix(10, 4, 31))));
  const auto j = io::to_json(basis);
  EXPECT_EQ(j.at("J").get<int>(), basis.J);
  EXPECT_EQ(io::vec_from_json(j.at("eigenvalues")), basis.eigenvalues);
}

TEST(Io, SpecFromJson) {
  const auto j = io::json::parse(R"({
    "J0": 2, "T": 6, "lambdas": [2, 1], "noise_sigma2": 0.05, "seed": 9, "basis": "fourier",
    "enforce_unit_variance": true,
    "dynamics": {"type": "univ_argarch", "ar": [0.5, 0.2], "arch": [0.1, 0.1], "garch": [0.8, 0.8]}
  })");
  const auto s = io::spec_from_json(j);
  EXPECT_EQ(s.J0, 2);
  EXPECT_EQ(s.grid_step, 14400);
  const auto& d = std::get<UnivArGarchDynamics>(s.dynamics);
  EXPECT_NEAR(d.var_const(0), 0.75 * 0.1, 1e-15);
  auto bad = j;
  bad["dynamics"]["type"] = "levy";
  EXPECT_EQ(code_of([&] { io::spec_from_json(bad); }), ErrorCode::InvalidSpec);
  bad = j;
  bad.erase("J0");
  EXPECT_EQ(code_of([&] { io::spec_from_json(bad); }), ErrorCode::InvalidSpec);
}

TEST(Errors, KindsMapToExitCodes) {
  EXPECT_EQ(kind_of(ErrorCode::ConfigInvalid), ErrorKind::Config);
  EXPECT_EQ(kind_of(ErrorCode::BadHorizon), ErrorKind::Config);
  EXPECT_EQ(kind_of(ErrorCode::NonPsdH), ErrorKind::Numerical);
  EXPECT_EQ(kind_of(ErrorCode::SingularDesign), ErrorKind::Numerical);
  EXPECT_EQ(kind_of(ErrorCode::IoError), ErrorKind::Data);
  EXPECT_EQ(kind_of(ErrorCode::InsufficientData), ErrorKind::Data);
}
