#include <random>

#include <gtest/gtest.h>

#include "dmdte/forecast.hpp"

using namespace dmdte;

namespace {

SignalMatrix sinusoid(Index nodes, Index steps, double period) {
    MatrixXd z(nodes, steps);
    for (Index i = 0; i < nodes; ++i) {
        for (Index t = 0; t < steps; ++t) {
            z(i, t) = std::sin(2 * M_PI * double(t) / period + 0.4 * double(i));
        }
    }
    return SignalMatrix::from_values(z);
}

MaskMatrix all_true(Index r, Index c) { return MaskMatrix::Constant(r, c, true); }

} // namespace

TEST(MakeSplits, DefaultRatios) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(2, 100));
    const SignalSplits sp = make_splits(s, {0.7, 0.1, 0.2});
    EXPECT_EQ(sp.val_begin, 70);
    EXPECT_EQ(sp.test_begin, 80);
    EXPECT_EQ(sp.train.steps(), 70);
    EXPECT_EQ(sp.val.origin_step, 70);
    EXPECT_EQ(sp.test.origin_step, 80);
    EXPECT_EQ(sp.test.values, s.values.rightCols(20));
}

TEST(MakeSplits, SixTwoTwo) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(1, 240));
    const SignalSplits sp = make_splits(s, {0.6, 0.2, 0.2});
    EXPECT_EQ(sp.val_begin, 144);
    EXPECT_EQ(sp.test_begin, 192);
}

TEST(MakeSplits, SingleSplitAndErrors) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(1, 30));
    const SignalSplits sp = make_splits(s, {1.0, 0.0, 0.0});
    EXPECT_EQ(sp.train.steps(), 30);
    EXPECT_EQ(sp.val.steps(), 0);
    EXPECT_EQ(sp.test.steps(), 0);
    EXPECT_THROW(make_splits(s, {0.5, 0.1, 0.1}), ConfigError);
    EXPECT_THROW(make_splits(s, {0.7, 0.1, 0.2}, 24), ConfigError);
}

TEST(ZScore, Examples) {
    MatrixXd z(1, 2);
    z << 0, 2;
    const ZScore zs = zscore_fit(SignalMatrix::from_values(z));
    EXPECT_DOUBLE_EQ(zs.mean(0), 1.0);
    EXPECT_DOUBLE_EQ(zs.std(0), 1.0);
    EXPECT_EQ(zscore_apply(zs, SignalMatrix::from_values(z)).values, (MatrixXd(1, 2) << -1, 1).finished());

    const ZScore flat = zscore_fit(SignalMatrix::from_values(MatrixXd::Constant(2, 5, 3.0)));
    EXPECT_EQ(flat.std(0), kStdFloor);
    EXPECT_TRUE(flat.floored.front());
    EXPECT_EQ(zscore_apply(flat, SignalMatrix::from_values(MatrixXd::Constant(2, 5, 3.0))).values,
              MatrixXd::Zero(2, 5));
}

TEST(ZScore, RoundTripAndTrainOnly) {
    SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(3, 50) * 7.0 + MatrixXd::Constant(3, 50, 2.0));
    SignalSplits sp = make_splits(s, {0.7, 0.1, 0.2});
    const ZScore before = zscore_fit(sp.train);
    const ZScore z = zscore_fit_apply(sp);
    EXPECT_EQ(z.mean, before.mean);
    EXPECT_LE((zscore_invert(z, sp.test.values) - s.values.rightCols(10)).cwiseAbs().maxCoeff(), 1e-10);
    // Masked entries do not enter the statistics.
    SignalMatrix m = SignalMatrix::from_values((MatrixXd(1, 3) << 1.0, 3.0, 1000.0).finished());
    m.mask(0, 2) = false;
    EXPECT_DOUBLE_EQ(zscore_fit(m).mean(0), 2.0);
}

TEST(MakeWindows, Counts) {
    EXPECT_EQ(make_windows(SignalMatrix::from_values(MatrixXd::Random(1, 24)), Split::train, 12, 12).size(), 1);
    EXPECT_EQ(make_windows(SignalMatrix::from_values(MatrixXd::Random(1, 25)), Split::train, 12, 12).size(), 2);
    EXPECT_EQ(make_windows(SignalMatrix::from_values(MatrixXd::Random(4, 40)), Split::val, 12, 12).size(), 17 * 4);
    EXPECT_TRUE(make_windows(SignalMatrix::from_values(MatrixXd::Random(1, 20)), Split::train, 12, 12).empty());
}

TEST(MakeWindows, WithEmbeddingShape) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(2, 40));
    VectorXc l(2);
    l << std::polar(1.0, 0.3), std::polar(1.0, 0.9);
    const TimeEmbedding e = build_embedding(l, 0, 40);
    const ForecastWindows w = make_windows(s, Split::train, 12, 12, &e);
    EXPECT_EQ(w.channels(), 5);
    EXPECT_EQ(w.windows.front().future_covariates.rows(), 12);
    EXPECT_EQ(w.windows.front().future_covariates.cols(), 4);
    EXPECT_EQ(layout_of(w).size(), 12 * 5 + 12 * 4);
}

TEST(FitRidge, NoiselessSinusoid) {
    const SignalMatrix s = sinusoid(2, 200, 24.0);
    const ForecastWindows w = make_windows(s, Split::train, 12, 12);
    const RidgeModel m = fit_ridge(w, 1e-8);
    const MatrixXd pred = predict(m, w);
    const MetricsReport r = evaluate(pred, target_matrix(w), target_mask(w));
    EXPECT_LE(r.overall_rmse, 1e-4);
    EXPECT_LE((pred - target_matrix(w)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(FitRidge, NormalEquationsAndLimits) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(3, 60));
    const ForecastWindows w = make_windows(s, Split::train, 5, 3);
    const RidgeModel m = fit_ridge(w, 0.1);
    const MatrixXd x = feature_matrix(w);
    const MatrixXd y = target_matrix(w);
    MatrixXd normal = x.transpose() * x;
    normal.diagonal().array() += 0.1;
    const MatrixXd residual = normal * m.weights - x.transpose() * y;
    EXPECT_LE(residual.norm() / (x.transpose() * y).norm(), 1e-6);

    const RidgeModel huge = fit_ridge(w, 1e12);
    EXPECT_LE(huge.weights.cwiseAbs().maxCoeff(), 1e-8);

    ForecastWindows zeros = w;
    for (Window& win : zeros.windows) {
        win.targets.setZero();
    }
    EXPECT_EQ(fit_ridge(zeros, 1e-3).weights, MatrixXd::Zero(x.cols(), 3));
    EXPECT_THROW(fit_ridge(ForecastWindows{}, 1e-3), ConfigError);
    EXPECT_THROW(fit_ridge(w, -1.0), ConfigError);
}

TEST(FitRidge, Deterministic) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(3, 80));
    const ForecastWindows w = make_windows(s, Split::train, 12, 12);
    EXPECT_EQ(fit_ridge(w, 1e-3).weights, fit_ridge(w, 1e-3).weights);
}

TEST(FitRidge, ZeroCovariatesAreANullTest) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(2, 120));
    SignalSplits sp = make_splits(s, {0.7, 0.1, 0.2});
    const ForecastWindows tr = make_windows(sp.train, Split::train, 6, 6);
    const ForecastWindows te = make_windows(sp.test, Split::test, 6, 6);
    TimeEmbedding zero = build_embedding(VectorXc{{cplx(1, 0)}, {cplx(0, 1)}}, 0, 120);
    zero.table.setZero();
    const MetricsReport a = evaluate(predict(fit_ridge(tr, 1e-3), te), target_matrix(te), target_mask(te));
    const ForecastWindows trz = attach_covariates(tr, zero);
    const ForecastWindows tez = attach_covariates(te, zero);
    const MetricsReport b = evaluate(predict(fit_ridge(trz, 1e-3), tez), target_matrix(tez), target_mask(tez));
    EXPECT_NEAR(a.overall_rmse, b.overall_rmse, 1e-10);
    EXPECT_NEAR(a.overall_mae, b.overall_mae, 1e-10);
}

TEST(Predict, PassthroughAndEmpty) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(1, 20));
    const ForecastWindows w = make_windows(s, Split::train, 3, 1);
    RidgeModel m;
    m.layout = layout_of(w);
    m.weights = MatrixXd::Zero(3, 1);
    m.weights(2, 0) = 1.0; // last history value
    const MatrixXd pred = predict(m, w);
    for (Index n = 0; n < w.size(); ++n) {
        EXPECT_EQ(pred(n, 0), w.windows[n].inputs(2, 0));
    }
    ForecastWindows empty = w;
    empty.windows.clear();
    EXPECT_EQ(predict(m, empty).rows(), 0);
    ForecastWindows other = make_windows(s, Split::train, 4, 1);
    EXPECT_THROW(predict(m, other), ConfigError);
}

TEST(Evaluate, Examples) {
    const MatrixXd z = MatrixXd::Random(4, 12);
    const MetricsReport same = evaluate(z, z, all_true(4, 12));
    EXPECT_EQ(same.overall_mae, 0.0);
    EXPECT_EQ(same.overall_rmse, 0.0);

    const MetricsReport ones = evaluate(MatrixXd::Ones(1, 2), MatrixXd::Zero(1, 2), all_true(1, 2));
    EXPECT_EQ(ones.overall_mae, 1.0);
    EXPECT_EQ(ones.overall_rmse, 1.0);

    MaskMatrix m = all_true(1, 2);
    m(0, 1) = false;
    const MetricsReport masked = evaluate(MatrixXd::Zero(1, 2), (MatrixXd(1, 2) << 0, 4).finished(), m);
    EXPECT_EQ(masked.overall_mae, 0.0);
    EXPECT_EQ(masked.excluded_count, 1);
    EXPECT_EQ(masked.evaluated_count, 1);

    EXPECT_THROW(evaluate(MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1), MaskMatrix::Constant(1, 1, false)), DataError);
    EXPECT_THROW(evaluate(MatrixXd::Zero(1, 2), MatrixXd::Zero(2, 1), all_true(2, 1)), ConfigError);
}

TEST(Evaluate, HorizonUsesItsOwnColumn) {
    MatrixXd target = MatrixXd::Zero(5, 12);
    target.col(5).setConstant(2.0); // horizon 6 only
    const MetricsReport r = evaluate(MatrixXd::Zero(5, 12), target, all_true(5, 12));
    EXPECT_EQ(*r.horizon_mae.at(3), 0.0);
    EXPECT_EQ(*r.horizon_mae.at(6), 2.0);
    EXPECT_EQ(*r.horizon_rmse.at(6), 2.0);
    EXPECT_EQ(*r.horizon_mae.at(12), 0.0);
    EXPECT_NEAR(r.overall_mae, 2.0 / 12.0, 1e-15);
}

TEST(Evaluate, RmseDominatesMae) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    MatrixXd p(30, 12);
    MatrixXd t(30, 12);
    for (Index i = 0; i < p.size(); ++i) {
        p(i) = g(rng);
        t(i) = g(rng);
    }
    const MetricsReport r = evaluate(p, t, all_true(30, 12));
    EXPECT_GE(r.overall_rmse, r.overall_mae);
    for (int h : kReportHorizons) {
        EXPECT_GE(*r.horizon_rmse.at(h), *r.horizon_mae.at(h));
    }
}

TEST(SelectL2, PicksFromGrid) {
    const SignalMatrix s = sinusoid(2, 200, 24.0);
    SignalSplits sp = make_splits(s, {0.7, 0.1, 0.2});
    const ForecastWindows tr = make_windows(sp.train, Split::train, 12, 12);
    const ForecastWindows va = make_windows(sp.val, Split::val, 4, 4);
    EXPECT_THROW(select_l2(tr, va, {}), ConfigError);
    const ForecastWindows va12 = make_windows(sp.test, Split::val, 12, 12);
    const double l2 = select_l2(tr, va12, default_l2_grid());
    EXPECT_EQ(l2, 1e-5);
}
