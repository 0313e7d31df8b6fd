#include "dmdte/forecast.hpp"

#include <cmath>

namespace dmdte {

SignalSplits make_splits(const SignalMatrix& signal, const SplitRatios& ratios, Index min_length) {
    if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must be nonnegative and sum to 1");
    }
    const Index t = signal.steps();
    const auto boundary = [&](double fraction) {
        return std::min<Index>(t, static_cast<Index>(std::floor(double(t) * fraction + 1e-9)));
    };
    SignalSplits s;
    s.val_begin = boundary(ratios.train);
    s.test_begin = std::max(s.val_begin, boundary(ratios.train + ratios.val));
    if (ratios.test == 0.0) {
        s.test_begin = t;
    }
    if (ratios.val == 0.0) {
        s.test_begin = std::max(s.test_begin, s.val_begin);
    }
    s.train = signal.slice(0, s.val_begin);
    s.val = signal.slice(s.val_begin, s.test_begin);
    s.test = signal.slice(s.test_begin, t);
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        if (part->steps() > 0 && part->steps() < min_length) {
            throw ConfigError("split of " + std::to_string(part->steps()) + " steps is shorter than " +
                              std::to_string(min_length));
        }
    }
    if (s.train.steps() == 0) {
        throw ConfigError("training split is empty");
    }
    return s;
}

ZScore zscore_fit(const SignalMatrix& train) {
    double sum = 0.0;
    double count = 0.0;
    for (Index i = 0; i < train.nodes(); ++i) {
        for (Index t = 0; t < train.steps(); ++t) {
            if (train.mask(i, t)) {
                sum += train.values(i, t);
                count += 1.0;
            }
        }
    }
    if (count == 0.0) {
        throw DataError("z-score: training split has no observed values");
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (Index i = 0; i < train.nodes(); ++i) {
        for (Index t = 0; t < train.steps(); ++t) {
            if (train.mask(i, t)) {
                ss += (train.values(i, t) - mean) * (train.values(i, t) - mean);
            }
        }
    }
    const double sd = std::sqrt(ss / count);
    ZScore z;
    z.mean = VectorXd::Constant(1, mean);
    z.std = VectorXd::Constant(1, std::max(sd, kStdFloor));
    z.floored = {sd < kStdFloor};
    return z;
}

SignalMatrix zscore_apply(const ZScore& z, const SignalMatrix& signal) {
    SignalMatrix out = signal;
    out.values = (signal.values.array() - z.mean(0)) / z.std(0);
    return out;
}

MatrixXd zscore_invert(const ZScore& z, const MatrixXd& values) {
    return (values.array() * z.std(0) + z.mean(0)).matrix();
}

ZScore zscore_fit_apply(SignalSplits& splits) {
    ZScore z = zscore_fit(splits.train);
    splits.train = zscore_apply(z, splits.train);
    splits.val = zscore_apply(z, splits.val);
    splits.test = zscore_apply(z, splits.test);
    return z;
}

ForecastWindows make_windows(const SignalMatrix& signal, Split split, Index history, Index horizon,
                             const TimeEmbedding* embedding) {
    if (history < 1 || horizon < 1) {
        throw ConfigError("history and horizon must be positive");
    }
    ForecastWindows out;
    out.history = history;
    out.horizon = horizon;
    out.base_channels = 1;
    const Index len = signal.steps();
    const Index anchors = len - history - horizon + 1;
    if (anchors > 0) {
        out.windows.reserve(static_cast<std::size_t>(anchors * signal.nodes()));
        for (Index i = 0; i < signal.nodes(); ++i) {
            for (Index a = 0; a < anchors; ++a) {
                const Index last = a + history - 1;
                Window w;
                w.inputs = signal.values.row(i).segment(a, history).transpose();
                w.targets = signal.values.row(i).segment(last + 1, horizon).transpose();
                w.target_mask = signal.mask.row(i).segment(last + 1, horizon).transpose();
                w.future_covariates.resize(horizon, 0);
                w.split = split;
                w.node_index = i;
                w.anchor_step = signal.origin_step + static_cast<long>(last);
                out.windows.push_back(std::move(w));
            }
        }
    }
    if (embedding != nullptr) {
        return attach_covariates(out, *embedding);
    }
    return out;
}

FeatureLayout layout_of(const ForecastWindows& windows) {
    return {windows.history, windows.channels(), windows.horizon, windows.covariate_channels};
}

MatrixXd feature_matrix(const ForecastWindows& windows) {
    const FeatureLayout layout = layout_of(windows);
    MatrixXd x(windows.size(), layout.size());
    for (Index n = 0; n < windows.size(); ++n) {
        const Window& w = windows.windows[static_cast<std::size_t>(n)];
        if (w.inputs.rows() != layout.history || w.inputs.cols() != layout.channels ||
            w.future_covariates.rows() != layout.horizon || w.future_covariates.cols() != layout.future_channels) {
            throw ConfigError("window " + std::to_string(n) + " does not match the feature layout");
        }
        Index col = 0;
        for (Index r = 0; r < layout.history; ++r) {
            x.row(n).segment(col, layout.channels) = w.inputs.row(r);
            col += layout.channels;
        }
        for (Index r = 0; r < layout.horizon; ++r) {
            x.row(n).segment(col, layout.future_channels) = w.future_covariates.row(r);
            col += layout.future_channels;
        }
    }
    return x;
}

MatrixXd target_matrix(const ForecastWindows& windows) {
    MatrixXd y(windows.size(), windows.horizon);
    for (Index n = 0; n < windows.size(); ++n) {
        y.row(n) = windows.windows[static_cast<std::size_t>(n)].targets.transpose();
    }
    return y;
}

MaskMatrix target_mask(const ForecastWindows& windows) {
    MaskMatrix m(windows.size(), windows.horizon);
    for (Index n = 0; n < windows.size(); ++n) {
        m.row(n) = windows.windows[static_cast<std::size_t>(n)].target_mask.transpose();
    }
    return m;
}

RidgeModel fit_ridge(const ForecastWindows& train, double l2) {
    if (train.empty()) {
        throw ConfigError("fit_ridge: no training windows");
    }
    if (!(l2 >= 0.0)) {
        throw ConfigError("fit_ridge: l2 must be nonnegative");
    }
    const MatrixXd x = feature_matrix(train);
    const MatrixXd y = target_matrix(train);
    if (!x.allFinite() || !y.allFinite()) {
        throw DataError("fit_ridge: non-finite features or targets");
    }
    MatrixXd normal = x.transpose() * x;
    normal.diagonal().array() += l2;
    const MatrixXd rhs = x.transpose() * y;

    RidgeModel model;
    model.l2 = l2;
    model.layout = layout_of(train);
    Eigen::LDLT<MatrixXd> ldlt(normal);
    if (l2 > 0.0 && ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        model.weights = ldlt.solve(rhs);
    } else {
        model.weights = normal.completeOrthogonalDecomposition().solve(rhs);
    }
    return model;
}

MatrixXd predict(const RidgeModel& model, const ForecastWindows& windows) {
    if (windows.empty()) {
        return MatrixXd(0, model.layout.horizon);
    }
    if (!(layout_of(windows) == model.layout)) {
        throw ConfigError("predict: window layout does not match the model");
    }
    return feature_matrix(windows) * model.weights;
}

MetricsReport evaluate(const MatrixXd& predictions, const MatrixXd& targets, const MaskMatrix& mask) {
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols() ||
        mask.rows() != targets.rows() || mask.cols() != targets.cols()) {
        throw ConfigError("evaluate: predictions, targets and mask must share a shape");
    }
    MetricsReport report;
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    Index n = 0;
    for (Index i = 0; i < targets.rows(); ++i) {
        for (Index j = 0; j < targets.cols(); ++j) {
            if (!mask(i, j)) {
                ++report.excluded_count;
                continue;
            }
            const double e = targets(i, j) - predictions(i, j);
            abs_sum += std::abs(e);
            sq_sum += e * e;
            ++n;
        }
    }
    if (n == 0) {
        throw DataError("evaluate: every entry is masked");
    }
    report.evaluated_count = n;
    report.overall_mae = abs_sum / double(n);
    report.overall_rmse = std::sqrt(sq_sum / double(n));

    for (int h : kReportHorizons) {
        if (h > targets.cols()) {
            continue;
        }
        double a = 0.0;
        double s = 0.0;
        Index m = 0;
        for (Index i = 0; i < targets.rows(); ++i) {
            if (mask(i, h - 1)) {
                const double e = targets(i, h - 1) - predictions(i, h - 1);
                a += std::abs(e);
                s += e * e;
                ++m;
            }
        }
        if (m > 0) {
            report.horizon_mae[h] = a / double(m);
            report.horizon_rmse[h] = std::sqrt(s / double(m));
        } else {
            report.horizon_mae[h] = std::nullopt;
            report.horizon_rmse[h] = std::nullopt;
        }
    }
    return report;
}

std::vector<double> default_l2_grid() { return {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}; }

double select_l2(const ForecastWindows& train, const ForecastWindows& val, const std::vector<double>& grid) {
    if (grid.empty()) {
        throw ConfigError("select_l2: empty grid");
    }
    if (val.empty()) {
        return grid[grid.size() / 2];
    }
    const MatrixXd y = target_matrix(val);
    const MaskMatrix m = target_mask(val);
    double best = grid.front();
    double best_rmse = std::numeric_limits<double>::infinity();
    for (double l2 : grid) {
        const RidgeModel model = fit_ridge(train, l2);
        const double rmse = evaluate(predict(model, val), y, m).overall_rmse;
        if (rmse < best_rmse) {
            best_rmse = rmse;
            best = l2;
        }
    }
    return best;
}

} // namespace dmdte
