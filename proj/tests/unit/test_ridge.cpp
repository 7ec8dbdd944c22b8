#include <chrono>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "braindec/errors.hpp"
#include "braindec/ridge.hpp"
#include "test_support.hpp"

using namespace braindec;
using namespace braindec::ridge;
using testsupport::gaussian;

namespace {

FitConfig single(double lambda, FormChoice form = FormChoice::automatic) {
  FitConfig c;
  c.lambda_grid = {lambda};
  c.form = form;
  return c;
}

// Hand-built primal model with identity standardizers.
RidgeModel manual_model(const Matrix& W) {
  RidgeModel m;
  m.form = Form::primal;
  m.weights = W;
  m.x_stats.mean = Vector::Zero(W.cols());
  m.x_stats.std = Vector::Ones(W.cols());
  m.y_stats.mean = Vector::Zero(W.rows());
  m.y_stats.std = Vector::Ones(W.rows());
  return m;
}

double pearson(const Vector& a, const Vector& b) {
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

}  // namespace

TEST(Ridge, OrthonormalInterpolationAtLambdaZero) {
  const Matrix A = gaussian(12, 3, 1);
  const Matrix Q = Eigen::HouseholderQR<Matrix>(A).householderQ() * Matrix::Identity(12, 3);
  const Matrix B = gaussian(3, 4, 2);
  Matrix Y = Q * B;
  Y.rowwise() += Eigen::RowVectorXd::LinSpaced(4, 1.0, 4.0);
  const auto model = fit(Q, Y, single(0.0));
  EXPECT_EQ(model.form, Form::primal);
  EXPECT_LT((predict(model, Q) - Y).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ridge, FourByTwoMatchesExplicitNormalEquations) {
  Matrix X(4, 2);
  X << 1, 2, 2, 1, 3, 5, 4, 3;
  Matrix y(4, 1);
  y << 1, 3, 2, 6;
  // Centered normal equations with an explicit 2x2 inverse.
  const double mx0 = X.col(0).mean(), mx1 = X.col(1).mean(), my = y.mean();
  double a = 0, b = 0, d = 0, r0 = 0, r1 = 0;
  for (int i = 0; i < 4; ++i) {
    const double u = X(i, 0) - mx0, v = X(i, 1) - mx1, w = y(i, 0) - my;
    a += u * u;
    b += u * v;
    d += v * v;
    r0 += u * w;
    r1 += v * w;
  }
  const double det = a * d - b * b;
  const double beta0 = (d * r0 - b * r1) / det;
  const double beta1 = (-b * r0 + a * r1) / det;
  const double icpt = my - mx0 * beta0 - mx1 * beta1;

  const auto model = fit(X, y, single(0.0));
  const Matrix pred = predict(model, X);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(pred(i, 0), icpt + beta0 * X(i, 0) + beta1 * X(i, 1), 1e-9);
}

TEST(Ridge, PrimalDualEquivalence) {
  const Matrix X = gaussian(40, 60, 3);
  const Matrix Y = gaussian(40, 8, 4);
  const Matrix Xt = gaussian(15, 60, 5);
  for (double lambda : {0.1, 1.0, 10.0}) {
    const auto p = fit(X, Y, single(lambda, FormChoice::primal));
    const auto d = fit(X, Y, single(lambda, FormChoice::dual));
    EXPECT_EQ(p.form, Form::primal);
    EXPECT_EQ(d.form, Form::dual);
    EXPECT_LT((predict(p, Xt) - predict(d, Xt)).cwiseAbs().maxCoeff(), 1e-8) << lambda;
    EXPECT_LT((primal_weights(d) - p.weights).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Ridge, AutomaticFormFollowsShape) {
  EXPECT_EQ(fit(gaussian(10, 4, 1), gaussian(10, 2, 2), single(1.0)).form, Form::primal);
  EXPECT_EQ(fit(gaussian(10, 40, 1), gaussian(10, 2, 2), single(1.0)).form, Form::dual);
}

TEST(Ridge, ShrinkageLimitGivesColumnMeans) {
  const Matrix X = gaussian(50, 7, 6);
  Matrix Y = gaussian(50, 3, 7);
  Y.col(1).array() += 100.0;
  const auto model = fit(X, Y, single(1e12));
  const Matrix pred = predict(model, gaussian(9, 7, 8));
  const Eigen::RowVectorXd mean = Y.colwise().mean();
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    for (Eigen::Index j = 0; j < pred.cols(); ++j)
      EXPECT_LE(std::abs(pred(i, j) - mean(j)), 1e-4 * std::max(std::abs(mean(j)), 1.0));
}

TEST(Ridge, TrainingRowRecoveredNearZeroLambda) {
  const Matrix X = gaussian(6, 9, 9);
  const Matrix Y = gaussian(6, 2, 10);
  const auto model = fit(X, Y, single(1e-10));
  EXPECT_LT((predict(model, X.row(2)) - Y.row(2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ridge, EmptyPredictionInput) {
  const auto model = fit(gaussian(8, 3, 1), gaussian(8, 5, 2), single(1.0));
  const Matrix out = predict(model, Matrix(0, 3));
  EXPECT_EQ(out.rows(), 0);
  EXPECT_EQ(out.cols(), 5);
}

TEST(Ridge, PredictDimensionMismatch) {
  const auto model = fit(gaussian(8, 3, 1), gaussian(8, 2, 2), single(1.0));
  EXPECT_THROW(predict(model, gaussian(2, 4, 3)), ArgumentError);
}

TEST(Ridge, NanInputIsDataError) {
  Matrix X = gaussian(8, 3, 1);
  X(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit(X, gaussian(8, 2, 2), single(1.0)), DataError);
  Matrix Y = gaussian(8, 2, 2);
  Y(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit(gaussian(8, 3, 1), Y, single(1.0)), DataError);
}

TEST(Ridge, SingularAtLambdaZeroAdvisesPositiveLambda) {
  Matrix X = gaussian(10, 3, 1);
  X.col(2) = 2.0 * X.col(0) + X.col(1);
  try {
    fit(X, gaussian(10, 1, 2), single(0.0));
    FAIL();
  } catch (const RankDeficiencyError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda > 0"), std::string::npos);
  }
  EXPECT_NO_THROW(fit(X, gaussian(10, 1, 2), single(0.5)));
  // Dual form at lambda=0 with more voxels than samples is singular after centering.
  EXPECT_THROW(fit(gaussian(5, 20, 3), gaussian(5, 1, 4), single(0.0)), RankDeficiencyError);
}

TEST(Ridge, MonotoneShrinkage) {
  const Matrix X = gaussian(30, 12, 11);
  const Matrix Y = gaussian(30, 4, 12);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const double f = fit(X, Y, single(lambda)).weights.norm();
    EXPECT_LE(f, prev);
    prev = f;
  }
}

TEST(Ridge, StandardizeYDoesNotChangePredictions) {
  const Matrix X = gaussian(25, 30, 13);
  Matrix Y = gaussian(25, 5, 14);
  Y.col(0) *= 50.0;
  Y.col(3).array() += 7.0;
  const Matrix Xt = gaussian(6, 30, 15);
  for (auto form : {FormChoice::primal, FormChoice::dual}) {
    auto on = single(2.0, form);
    auto off = on;
    off.standardize_y = false;
    EXPECT_LT((predict(fit(X, Y, on), Xt) - predict(fit(X, Y, off), Xt)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Ridge, ChunkedTargetsMatchUnchunked) {
  const Matrix X = gaussian(20, 35, 16);
  const Matrix Y = gaussian(20, 11, 17);
  const Matrix Xt = gaussian(4, 35, 18);
  auto whole = single(1.0);
  auto chunked = whole;
  chunked.target_chunk = 3;
  EXPECT_LT((predict(fit(X, Y, whole), Xt) - predict(fit(X, Y, chunked), Xt)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ridge, FloatTensorTargetsMatchMatrix) {
  const Matrix X = gaussian(15, 4, 19);
  const auto yf = testsupport::gaussian_floats(15 * 6, 20);
  const Tensor Yt = Tensor::from<float>({15, 6}, yf);
  const Matrix Ym = to_matrix(Yt);
  auto cfg = single(0.7);
  cfg.target_chunk = 4;
  const Matrix a = predict(fit(X, Targets(Yt), cfg), X);
  const Matrix b = predict(fit(X, Ym, cfg), X);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  const Tensor f = predict_f32(fit(X, Ym, cfg), X);
  EXPECT_EQ(f.dtype(), DType::f32);
  EXPECT_NEAR(f.values<float>()[7], b(1, 1), 1e-5);
}

TEST(Ridge, CapacityEstimateEnforced) {
  auto cfg = single(1.0);
  cfg.memory_budget_bytes = 1024;
  EXPECT_THROW(fit(gaussian(20, 10, 1), gaussian(20, 3, 2), cfg), CapacityError);
}

TEST(Ridge, ConfigValidation) {
  FitConfig c;
  c.lambda_grid = {};
  EXPECT_THROW(c.validate(), ConfigError);
  c.lambda_grid = {1.0, 1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.lambda_grid = {-1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.lambda_grid = {1.0};
  c.holdout_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SelectLambda, SingleValueGrid) {
  EXPECT_EQ(select_lambda(gaussian(20, 3, 1), gaussian(20, 2, 2), single(3.5)), 3.5);
}

TEST(SelectLambda, TieGoesToLargerLambda) {
  EXPECT_EQ(pick_lambda({0.1, 1.0, 10.0}, {0.5, 0.8, 0.8}), 10.0);
  EXPECT_EQ(pick_lambda({0.1, 1.0, 10.0}, {0.9, 0.8, 0.8}), 0.1);
  EXPECT_EQ(pick_lambda({0.1, 1.0}, {std::nan(""), 0.2}), 1.0);
}

TEST(SelectLambda, SyntheticLinearRecovery) {
  const Matrix X = gaussian(500, 100, 21);
  const Matrix W = gaussian(100, 50, 22);
  const Matrix Y = X * W + 0.1 * gaussian(500, 50, 23);
  FitConfig cfg;
  cfg.lambda_grid = {0.01, 0.1, 1, 10, 100, 1000, 10000};
  cfg.seed = 5;
  const auto [train, hold] = holdout_split(500, cfg.holdout_fraction, cfg.seed);
  Matrix Xtr(train.size(), 100), Ytr(train.size(), 50), Xh(hold.size(), 100), Yh(hold.size(), 50);
  for (std::size_t i = 0; i < train.size(); ++i) {
    Xtr.row(i) = X.row(train[i]);
    Ytr.row(i) = Y.row(train[i]);
  }
  for (std::size_t i = 0; i < hold.size(); ++i) {
    Xh.row(i) = X.row(hold[i]);
    Yh.row(i) = Y.row(hold[i]);
  }
  const auto model = fit(Xtr, Ytr, cfg);
  EXPECT_EQ(model.grid_scores.size(), cfg.lambda_grid.size());
  const Matrix pred = predict(model, Xh);
  double r = 0.0;
  for (Eigen::Index j = 0; j < 50; ++j) r += pearson(pred.col(j), Yh.col(j));
  EXPECT_GT(r / 50.0, 0.95);
}

TEST(SelectLambda, ScoresMatchDirectRefits) {
  const Matrix X = gaussian(60, 8, 31);
  const Matrix Y = X * gaussian(8, 3, 32) + gaussian(60, 3, 33);
  FitConfig cfg;
  cfg.lambda_grid = {0.1, 10.0, 1000.0};
  cfg.holdout_fraction = 0.25;
  cfg.seed = 9;
  const auto sel = select_lambda(X, Targets(Y), cfg);
  const auto [train, hold] = holdout_split(60, 0.25, 9);
  Matrix Xtr(train.size(), 8), Ytr(train.size(), 3), Xh(hold.size(), 8), Yh(hold.size(), 3);
  for (std::size_t i = 0; i < train.size(); ++i) {
    Xtr.row(i) = X.row(train[i]);
    Ytr.row(i) = Y.row(train[i]);
  }
  for (std::size_t i = 0; i < hold.size(); ++i) {
    Xh.row(i) = X.row(hold[i]);
    Yh.row(i) = Y.row(hold[i]);
  }
  for (std::size_t k = 0; k < cfg.lambda_grid.size(); ++k) {
    const Matrix pred = predict(fit(Xtr, Ytr, single(cfg.lambda_grid[k])), Xh);
    double r = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) r += pearson(pred.col(j), Yh.col(j));
    EXPECT_NEAR(sel.scores[k], r / 3.0, 1e-9) << k;
  }
}

TEST(SelectLambda, ConstantHoldoutColumnExcluded) {
  const Matrix X = gaussian(40, 5, 41);
  Matrix Y = X * gaussian(5, 3, 42);
  Y.col(1).setConstant(2.0);
  FitConfig cfg;
  cfg.lambda_grid = {0.1, 1.0};
  const auto sel = select_lambda(X, Targets(Y), cfg);
  EXPECT_EQ(sel.excluded_targets, 1u);
  for (double s : sel.scores) EXPECT_TRUE(std::isfinite(s));
}

TEST(SelectLambda, DeterministicSplit) {
  const auto a = holdout_split(100, 0.1, 3);
  const auto b = holdout_split(100, 0.1, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.second.size(), 10u);
  std::set<std::size_t> all(a.first.begin(), a.first.end());
  all.insert(a.second.begin(), a.second.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_NE(holdout_split(100, 0.1, 4).second, a.second);
  EXPECT_THROW(holdout_split(3, 0.1, 1), ArgumentError);
}

TEST(WeightL1, ZeroWeights) {
  const auto out = weight_l1_per_voxel(manual_model(Matrix::Zero(3, 4)));
  EXPECT_EQ(out, std::vector<double>(4, 0.0));
}

TEST(WeightL1, SingleEntry) {
  Matrix W = Matrix::Zero(5, 7);
  W(3, 5) = -2.0;
  const auto out = weight_l1_per_voxel(manual_model(W));
  for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(out[j], j == 5 ? 2.0 : 0.0);
}

TEST(WeightL1, RandomMatchesDirectSum) {
  const Matrix W = gaussian(7, 4, 51);
  const auto out = weight_l1_per_voxel(manual_model(W));
  for (Eigen::Index j = 0; j < 4; ++j) {
    double s = 0.0;
    for (Eigen::Index t = 0; t < 7; ++t) s += std::abs(W(t, j));
    EXPECT_EQ(out[static_cast<std::size_t>(j)], s);
  }
}

TEST(WeightL1, DualChunkedMatchesPrimal) {
  const Matrix X = gaussian(12, 30, 52);
  const Matrix Y = gaussian(12, 9, 53);
  const auto p = fit(X, Y, single(1.0, FormChoice::primal));
  const auto d = fit(X, Y, single(1.0, FormChoice::dual));
  const auto a = weight_l1_per_voxel(p);
  L1Options chunked;
  chunked.target_chunk = 4;
  const auto b = weight_l1_per_voxel(d, chunked);
  const auto c = weight_l1_per_voxel(d);
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_NEAR(a[j], b[j], 1e-9);
    EXPECT_NEAR(a[j], c[j], 1e-9);
  }
  L1Options raw;
  raw.raw_space = true;
  const auto r = weight_l1_per_voxel(p, raw);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(r[j], a[j] / p.x_stats.std(static_cast<Eigen::Index>(j)), 1e-12);
}

TEST(WeightL1, DualOverBudgetIsCapacityError) {
  const auto d = fit(gaussian(6, 40, 54), gaussian(6, 30, 55), single(1.0, FormChoice::dual));
  L1Options tiny;
  tiny.budget_bytes = 1000;
  EXPECT_THROW(weight_l1_per_voxel(d, tiny), CapacityError);
  EXPECT_THROW(primal_weights(d, 1000), CapacityError);
  tiny.target_chunk = 2;  // 2 x 40 doubles = 640 bytes fits
  EXPECT_NO_THROW(weight_l1_per_voxel(d, tiny));
}

TEST(ModelIo, SaveLoadRoundtripBothForms) {
  testsupport::TempDir dir;
  const Matrix X = gaussian(10, 14, 61);
  const Matrix Y = gaussian(10, 3, 62);
  const Matrix Xt = gaussian(4, 14, 63);
  for (auto form : {FormChoice::primal, FormChoice::dual}) {
    FitConfig cfg;
    cfg.lambda_grid = {0.5, 5.0};
    cfg.holdout_fraction = 0.3;
    cfg.form = form;
    const auto model = fit(X, Y, cfg);
    const auto sub = dir / (form == FormChoice::primal ? "p" : "d");
    save_model(model, sub);
    const auto back = load_model(sub);
    EXPECT_EQ(back.form, model.form);
    EXPECT_EQ(back.lambda, model.lambda);
    EXPECT_EQ(back.grid_scores, model.grid_scores);
    EXPECT_EQ(back.config.lambda_grid, cfg.lambda_grid);
    EXPECT_EQ(predict(back, Xt), predict(model, Xt));
  }
  EXPECT_THROW(load_model(dir / "missing"), PathError);
}
