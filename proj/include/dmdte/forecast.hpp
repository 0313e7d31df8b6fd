#pragma once

// Windowed ridge Seq2Seq baseline: history (plus covariates up to t + Q) ->
// next Q values, one set of weights shared by every node.

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "dmdte/embedding.hpp"
#include "dmdte/signal.hpp"
#include "dmdte/windows.hpp"

namespace dmdte {

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

/// Contiguous chronological splits; `val_begin` and `test_begin` are column
/// indices into the source signal.
struct SignalSplits {
    SignalMatrix train;
    SignalMatrix val;
    SignalMatrix test;
    Index val_begin = 0;
    Index test_begin = 0;
};

/// Boundaries floor(T * train) and floor(T * (train + val)). Non-empty splits
/// shorter than `min_length` are rejected.
SignalSplits make_splits(const SignalMatrix& signal, const SplitRatios& ratios, Index min_length = 0);

struct ZScore {
    VectorXd mean; ///< per channel
    VectorXd std;  ///< per channel, floored at 1e-8
    std::vector<bool> floored;
    std::string source = "train";
};

inline constexpr double kStdFloor = 1e-8;

/// Statistics over the observed entries of `train`; a single-channel signal
/// gets one mean and one std shared by all nodes.
ZScore zscore_fit(const SignalMatrix& train);
SignalMatrix zscore_apply(const ZScore& z, const SignalMatrix& signal);
MatrixXd zscore_invert(const ZScore& z, const MatrixXd& values);
/// Fits on splits.train and normalizes all three splits in place.
ZScore zscore_fit_apply(SignalSplits& splits);

/// One window per valid anchor per node: (len - P - Q + 1) * N. Targets use
/// `signal.mask` for the observed flags.
ForecastWindows make_windows(const SignalMatrix& signal, Split split, Index history, Index horizon,
                             const TimeEmbedding* embedding = nullptr);

struct FeatureLayout {
    Index history = 0;
    Index channels = 0;           ///< per history row
    Index horizon = 0;
    Index future_channels = 0;    ///< per future row

    Index size() const { return history * channels + horizon * future_channels; }
    bool operator==(const FeatureLayout&) const = default;
};

struct RidgeModel {
    MatrixXd weights; ///< features x Q
    double l2 = 0.0;
    FeatureLayout layout;
};

FeatureLayout layout_of(const ForecastWindows& windows);

/// Row-major flattening: history rows first, then future covariate rows.
MatrixXd feature_matrix(const ForecastWindows& windows);
MatrixXd target_matrix(const ForecastWindows& windows);
MaskMatrix target_mask(const ForecastWindows& windows);

RidgeModel fit_ridge(const ForecastWindows& train, double l2);

/// windows x Q predictions in the windows' (normalized) units.
MatrixXd predict(const RidgeModel& model, const ForecastWindows& windows);

struct MetricsReport {
    std::map<int, std::optional<double>> horizon_mae;
    std::map<int, std::optional<double>> horizon_rmse;
    double overall_mae = 0.0;
    double overall_rmse = 0.0;
    Index excluded_count = 0;
    Index evaluated_count = 0;
};

inline constexpr std::array<int, 3> kReportHorizons{3, 6, 12};

/// MAE / RMSE over entries with mask == true; horizon k uses column k - 1.
MetricsReport evaluate(const MatrixXd& predictions, const MatrixXd& targets, const MaskMatrix& mask);

/// Validation-driven choice over a geometric grid; returns the l2 with the
/// lowest overall validation RMSE (first one on ties).
double select_l2(const ForecastWindows& train, const ForecastWindows& val, const std::vector<double>& grid);

std::vector<double> default_l2_grid();

} // namespace dmdte
