#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmdte/linalg.hpp"

namespace dmdte {

using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// N x T observations, node-major: row i is node i, column t is step t.
struct SignalMatrix {
    MatrixXd values;
    MaskMatrix mask; ///< true = observed
    std::vector<std::string> node_ids;
    double step_seconds = 1.0;
    long origin_step = 0; ///< absolute step index of column 0

    Index nodes() const { return values.rows(); }
    Index steps() const { return values.cols(); }
    bool fully_observed() const { return mask.size() == 0 || mask.all(); }
    Index missing_count() const { return mask.size() - mask.count(); }

    /// Throws DataError when shapes disagree or observed entries are not finite.
    void validate(Index min_steps = 2) const;

    /// Columns [begin, end) as a new matrix with origin_step shifted accordingly.
    SignalMatrix slice(Index begin, Index end) const;

    static SignalMatrix from_values(MatrixXd values, double step_seconds = 1.0);
};

/// Per-node linear interpolation over masked entries; leading and trailing
/// gaps hold the nearest observed value. The returned mask is all-true; keep
/// the input's mask around when metrics must exclude the original gaps.
SignalMatrix impute_linear(const SignalMatrix& signal);

} // namespace dmdte
