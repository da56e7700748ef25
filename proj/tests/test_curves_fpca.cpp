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

std::vector<PricePoint> hourly_prices(std::int64_t start, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 0.01);
  std::vector<PricePoint> out;
  double p = 100.0;
  for (int i = 0; i < n; ++i) {
    out.push_back({start + 3600 * i, p});
    p *= std::exp(z(rng));
  }
  return out;
}

Mat random_matrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = z(rng);
  return m;
}

}  // namespace

TEST(Returns, PercentLogReturnsOnExactGrid) {
  const std::vector<PricePoint> px{{0, 100.0}, {3600, 110.0}, {7200, 99.0}};
  const FlatReturns r = compute_flat_returns(px, 3600);
  ASSERT_EQ(r.values.size(), 2u);
  EXPECT_NEAR(r.values[0], 100.0 * std::log(1.1), 1e-12);
  EXPECT_NEAR(r.values[1], 100.0 * std::log(0.9), 1e-12);
  EXPECT_EQ(r.end_times[0], 3600);
  EXPECT_FALSE(r.filled[0]);
}

TEST(Returns, ForwardFillCarriesLastTick) {
  const std::vector<PricePoint> px{{0, 100.0}, {3700, 105.0}, {10800, 110.0}};
  const FlatReturns r = compute_flat_returns(px, 3600);
  ASSERT_EQ(r.values.size(), 3u);
  EXPECT_DOUBLE_EQ(r.values[0], 0.0);  // 3600 still sees the tick at 0
  EXPECT_TRUE(r.filled[0]);
  EXPECT_NEAR(r.values[1], 100.0 * std::log(1.05), 1e-12);
  EXPECT_FALSE(r.filled[1]);  // a tick arrived inside (3600, 7200]
  EXPECT_NEAR(r.values[2], 100.0 * std::log(110.0 / 105.0), 1e-12);
  EXPECT_FALSE(r.filled[2]);
}

TEST(Returns, StrictPolicyRejectsGaps) {
  const std::vector<PricePoint> px{{0, 100.0}, {7200, 105.0}};
  EXPECT_EQ(code_of([&] { compute_flat_returns(px, 3600, FillPolicy::Strict); }), ErrorCode::GridMisaligned);
  const std::vector<PricePoint> off{{10, 100.0}, {3610, 105.0}};
  EXPECT_EQ(code_of([&] { compute_flat_returns(off, 3600, FillPolicy::Strict); }), ErrorCode::GridMisaligned);
}

TEST(Returns, RejectsBadPrices) {
  EXPECT_EQ(code_of([] { compute_flat_returns({{0, 1.0}, {3600, 0.0}}, 3600); }), ErrorCode::NonPositivePrice);
  EXPECT_EQ(code_of([] { compute_flat_returns({{3600, 1.0}, {3600, 2.0}}, 3600); }),
            ErrorCode::NonIncreasingTimestamp);
}

TEST(Returns, CutsCompleteDays) {
  // starts mid-day: the partial first day is dropped
  const auto px = hourly_prices(5 * 3600, 24 * 3 + 1, 1);
  const DailyReturns d = compute_returns(px);
  ASSERT_EQ(d.curves.size(), 2u);
  EXPECT_EQ(d.curves[0].day_start, 86400);
  EXPECT_EQ(d.curves[0].day_index, 1);
  EXPECT_EQ(d.curves[0].values.size(), 24u);
  EXPECT_DOUBLE_EQ(d.curves[0].grid.back(), 1.0);
  EXPECT_NEAR(d.curves[0].grid.front(), 1.0 / 24.0, 1e-15);
  EXPECT_EQ(d.dropped_days, 2);
  EXPECT_NEAR(d.curves[1].values[0], 100.0 * std::log(px[44].price / px[43].price), 1e-12);
}

TEST(Returns, DayOffsetShiftsBoundary) {
  const auto px = hourly_prices(0, 24 * 2 + 1, 2);
  ReturnOptions o;
  o.day_offset_steps = 3;
  const DailyReturns d = compute_returns(px, o);
  ASSERT_EQ(d.curves.size(), 1u);
  EXPECT_EQ(d.curves[0].day_start, 3 * 3600);
}

TEST(Returns, GridMustDivideDay) {
  ReturnOptions o;
  o.grid_step = 7000;
  EXPECT_EQ(code_of([&] { compute_returns(hourly_prices(0, 100, 3), o); }), ErrorCode::PreconditionViolation);
}

TEST(Returns, FifteenMinuteGridHas96Points) {
  std::vector<PricePoint> px;
  for (int i = 0; i <= 96 * 2; ++i) px.push_back({900 * i, 100.0 + 0.01 * i});
  ReturnOptions o;
  o.grid_step = 900;
  const auto d = compute_returns(px, o);
  ASSERT_EQ(d.curves.size(), 2u);
  EXPECT_EQ(d.curves[0].values.size(), 96u);
}

TEST(Panel, DemeanAndSlice) {
  const Mat x = random_matrix(6, 4, 4);
  const auto raw = panel_from_matrix(x);
  EXPECT_EQ(raw.N(), 6);
  EXPECT_EQ(raw.T(), 4);
  const auto dm = demean_panel(raw);
  EXPECT_TRUE(dm.demeaned);
  EXPECT_LT(dm.matrix().colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(dm.mean_curve[2], x.col(2).mean(), 1e-14);
  EXPECT_EQ(code_of([&] { demean_panel(dm); }), ErrorCode::AlreadyDemeaned);

  const auto s = slice_panel(raw, 2, 3);
  EXPECT_EQ(s.N(), 3);
  EXPECT_EQ(s.matrix(), x.middleRows(2, 3));
  EXPECT_EQ(code_of([&] { slice_panel(raw, 4, 3); }), ErrorCode::IndexOutOfRange);
}

TEST(Fpca, RequiresDemeanedPanel) {
  const auto raw = panel_from_matrix(random_matrix(5, 3, 5));
  EXPECT_EQ(code_of([&] { fit_fpca(raw); }), ErrorCode::NotDemeaned);
}

TEST(Fpca, ZeroPanelIsDegenerate) {
  const auto dm = demean_panel(panel_from_matrix(Mat::Ones(5, 3)));
  EXPECT_EQ(code_of([&] { fit_fpca(dm); }), ErrorCode::DegeneratePanel);
}

TEST(Fpca, BasisIsOrthonormalAndReconstructs) {
  const Mat x = random_matrix(30, 8, 6);
  const auto dm = demean_panel(panel_from_matrix(x));
  const FpcaBasis b = fit_fpca(dm);
  EXPECT_EQ(b.j_max(), 8);
  const Mat gram = b.eigenfunctions.transpose() * b.eigenfunctions;
  EXPECT_LT((gram - Mat::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-12);
  for (int j = 0; j + 1 < 8; ++j) EXPECT_GE(b.eigenvalues(j), b.eigenvalues(j + 1));
  for (int j = 0; j < 8; ++j) {
    Eigen::Index arg;
    b.eigenfunctions.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(b.eigenfunctions(arg, j), 0.0);
  }
  for (int i = 0; i < 30; ++i)
    EXPECT_LT((reconstruct(b, i, 8) - x.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(b.cpv(7), 1.0, 1e-12);
}

TEST(Fpca, CpvSelection) {
  Vec ev(4);
  ev << 5.0, 3.0, 1.5, 0.5;  // cumulative 0.5, 0.8, 0.95, 1
  EXPECT_EQ(select_J(ev, 0.5), 1);
  EXPECT_EQ(select_J(ev, 0.85), 3);
  EXPECT_EQ(select_J(ev, 0.8), 2);
  EXPECT_EQ(select_J(ev, 1.0), 4);
  EXPECT_EQ(code_of([&] { select_J(Vec::Zero(3), 0.85); }), ErrorCode::AllZeroEigenvalues);
  EXPECT_EQ(code_of([&] { select_J(ev, 0.0); }), ErrorCode::PreconditionViolation);
}

TEST(Fpca, RecoversPlantedLowRankStructure) {
  const int T = 12, N = 400;
  const Mat basis = make_orthonormal_basis(T, 2, 7);
  // exactly uncorrelated unit-variance scores so the planted axes are the population ones
  const Mat raw = random_matrix(N, 2, 8);
  const Mat centred = raw.rowwise() - raw.colwise().mean();
  const Mat s = Eigen::HouseholderQR<Mat>(centred).householderQ() * Mat::Identity(N, 2) * std::sqrt(double(N));
  Mat x = s.col(0) * 2.0 * basis.col(0).transpose() + s.col(1) * 1.5 * basis.col(1).transpose();
  x += 0.01 * random_matrix(N, T, 9);
  const FpcaBasis b = fit_fpca(demean_panel(panel_from_matrix(x)));
  EXPECT_EQ(b.J, 2);
  EXPECT_GT(std::abs(b.eigenfunctions.col(0).dot(basis.col(0))), 0.999);
  EXPECT_GT(std::abs(b.eigenfunctions.col(1).dot(basis.col(1))), 0.999);
}

TEST(Fpca, GridWeightScalesEigenvaluesAndFunctions) {
  const Mat x = random_matrix(20, 6, 10);
  const auto dm = demean_panel(panel_from_matrix(x));
  FpcaOptions o;
  o.weight = GridWeight::InverseT;
  const FpcaBasis u = fit_fpca(dm);
  const FpcaBasis w = fit_fpca(dm, o);
  EXPECT_NEAR(w.weight, 1.0 / 6.0, 1e-15);
  EXPECT_LT((w.eigenvalues * 6.0 - u.eigenvalues).cwiseAbs().maxCoeff(), 1e-12);
  const Mat gram = w.weight * w.eigenfunctions.transpose() * w.eigenfunctions;
  EXPECT_LT((gram - Mat::Identity(w.j_max(), w.j_max())).cwiseAbs().maxCoeff(), 1e-12);
  // the fitted curves do not depend on the weight
  EXPECT_LT((reconstruct(w, 3, 4) - reconstruct(u, 3, 4)).cwiseAbs().maxCoeff(), 1e-12);
  // scores are still uncorrelated with variance lambda_j
  const Mat m = w.scores.transpose() * w.scores / 20.0;
  EXPECT_LT((m - Mat(w.eigenvalues.asDiagonal())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fpca, OmegaMatchesResidualVarianceFormula) {
  const Mat x = random_matrix(40, 5, 11);
  FpcaOptions o;
  o.delta = 0.5;
  const FpcaBasis b = fit_fpca(demean_panel(panel_from_matrix(x)), o);
  ASSERT_LT(b.J, 5);
  for (int t = 0; t < 5; ++t) {
    const double proj = b.retained().row(t).squaredNorm();
    EXPECT_NEAR(b.omega(t), b.sigma2_resid * (1.0 - proj), 1e-14);
  }
  EXPECT_GT(b.sigma2_resid, 0.0);
}

TEST(Fpca, JmaxDefaultsToMinOfNMinusOneAndT) {
  const FpcaBasis b = fit_fpca(demean_panel(panel_from_matrix(random_matrix(4, 10, 12))));
  EXPECT_EQ(b.j_max(), 3);
  FpcaOptions o;
  o.j_max = 2;
  EXPECT_EQ(fit_fpca(demean_panel(panel_from_matrix(random_matrix(30, 10, 13))), o).j_max(), 2);
}

TEST(Linalg, NormalQuantileAndSqrt) {
  EXPECT_NEAR(normal_two_sided_quantile(0.95), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  Mat a(2, 2);
  a << 4.0, 1.0, 1.0, 3.0;
  const Mat r = sym_sqrt(a);
  EXPECT_LT((r * r - a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(is_psd(a));
  a(1, 1) = -1.0;
  EXPECT_FALSE(is_psd(a));
}
