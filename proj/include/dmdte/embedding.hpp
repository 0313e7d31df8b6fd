#pragma once

#include <filesystem>

#include "dmdte/linalg.hpp"
#include "dmdte/windows.hpp"

namespace dmdte {

/// Per-step covariates from selected DMD eigenvalues. Row k of `table` is the
/// absolute step first_step + k and holds
///   [Re(l_1^n) .. Re(l_r^n), Im(l_1^n) .. Im(l_r^n)],  n = step - origin_step.
struct TimeEmbedding {
    VectorXc eigenvalues; ///< pair representatives, Im >= 0, as given
    long origin_step = 0;
    long first_step = 0;
    MatrixXd table;
    bool unit_circle_projected = true;

    Index modes() const { return eigenvalues.size(); }
    Index width() const { return table.cols(); }
    Index length() const { return table.rows(); }
    long end_step() const { return first_step + static_cast<long>(length()); }
    bool covers(long step) const { return step >= first_step && step < end_step(); }

    /// Row for an absolute step; ConfigError when outside the span.
    Eigen::Ref<const VectorXd> at(long step) const;
};

/// Channel bookkeeping for covariates appended to windows: m -> m + 2r.
struct CovariateAttachment {
    Index base_channels = 0;
    Index embedded_channels = 0;
};

/// Table over the absolute span [t_start, t_end), powers anchored at
/// `origin_step`. With `project_unit_circle`, each lambda is replaced by
/// lambda / |lambda| before powering.
TimeEmbedding build_embedding(const VectorXc& selected, long t_start, long t_end, bool project_unit_circle = true,
                              long origin_step = 0);

/// One representative (Im >= 0) per conjugate pair, in order of appearance.
VectorXc pair_representatives(const VectorXc& eigenvalues, double tol = 1e-8);

/// Appends 2r history channels and the Q x 2r future covariate block to
/// every window. Throws ConfigError naming the first uncovered step.
ForecastWindows attach_covariates(const ForecastWindows& windows, const TimeEmbedding& emb);

CovariateAttachment attachment_of(const ForecastWindows& windows);

/// CSV "step,re_1..re_r,im_1..im_r", values at 17 significant digits.
void export_embedding(const TimeEmbedding& emb, const std::filesystem::path& path);

/// Reads an exported table back. Eigenvalues are re-estimated from the first
/// two rows (exact only up to rounding); the table itself is bit-identical.
TimeEmbedding import_embedding(const std::filesystem::path& path);

} // namespace dmdte
