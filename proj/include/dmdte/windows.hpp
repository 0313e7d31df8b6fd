#pragma once

#include <string>
#include <vector>

#include "dmdte/linalg.hpp"

namespace dmdte {

enum class Split { train, val, test };

std::string to_string(Split split);

/// One Seq2Seq sample: P history rows (base channels, then covariates), Q
/// targets and the Q future covariate rows. `anchor_step` is the absolute
/// step of the last history row.
struct Window {
    MatrixXd inputs;            ///< P x channels
    VectorXd targets;           ///< Q
    Eigen::Array<bool, Eigen::Dynamic, 1> target_mask; ///< true = observed
    MatrixXd future_covariates; ///< Q x covariate_channels
    Split split = Split::train;
    Index node_index = 0;
    long anchor_step = 0;
};

struct ForecastWindows {
    Index history = 12;
    Index horizon = 12;
    Index base_channels = 1;
    Index covariate_channels = 0; ///< 2r
    std::vector<Window> windows;

    Index channels() const { return base_channels + covariate_channels; }
    Index size() const { return static_cast<Index>(windows.size()); }
    bool empty() const { return windows.empty(); }
};

} // namespace dmdte
