#pragma once

// Sparsity-promoting amplitude selection. The amplitude fit
//   J(a) = ||H - modes diag(a) C||_F^2 = a^H P a - 2 Re(q^H a) + s
// is solved with an l1 penalty on each conjugate group through ADMM, then the
// surviving support is refit without penalty ("polishing").

#include <vector>

#include "dmdte/dmd.hpp"
#include "dmdte/hankel.hpp"

namespace dmdte {

struct AdmmOptions {
    double rho = 1.0;
    double tolerance = 1e-6; ///< primal and dual residual bound
    int max_iterations = 10000;
};

struct GammaGrid {
    int points = 50;
    double lower_ratio = 1e-6; ///< first point = lower_ratio * gamma_max
};

/// Quadratic form of the amplitude fit plus the conjugate grouping of the
/// eigenvalues. `scale` is a typical amplitude magnitude used to normalize the
/// ADMM iterations.
struct SpdmdProblem {
    MatrixXc p;
    VectorXc q;
    double s = 0.0;
    double scale = 1.0;
    std::vector<std::vector<Index>> groups;

    Index size() const { return q.size(); }
    double loss(const VectorXc& a) const;
    /// Smallest gamma for which a = 0 is optimal.
    double gamma_max() const;
};

struct SpdmdSolution {
    double gamma = 0.0;
    VectorXc amplitudes;
    std::vector<bool> support;
    Index nonzero_count = 0; ///< nonzero amplitudes
    Index group_count = 0;   ///< nonzero conjugate groups
    double fit_loss = 0.0;
    bool polished = false;
    bool converged = true;
    int iterations = 0;
};

struct SpdmdPath {
    std::vector<double> gammas;
    std::vector<SpdmdSolution> solutions;
};

struct SpdmdSweep {
    SpdmdPath path;
    SpdmdSolution chosen; ///< polished
    bool target_reached = true;
    Index monotonicity_violations = 0; ///< group count rose by more than one
    Index refinements = 0;             ///< bisection points added around the target
};

/// Builds P, q, s against the fit window of `view` (the same view given to
/// fit_dmd; the decomposition's window choice is re-applied here).
SpdmdProblem spdmd_problem(const DmdDecomposition& dec, const HankelView& view);

SpdmdSolution spdmd_solve(const SpdmdProblem& problem, double gamma, const AdmmOptions& opts = {});
SpdmdSolution spdmd_solve(const DmdDecomposition& dec, const HankelView& view, double gamma,
                          const AdmmOptions& opts = {});

/// Unpenalized refit restricted to `support`; off-support entries are exactly 0.
VectorXc polish(const SpdmdProblem& problem, const std::vector<bool>& support);
VectorXc polish(const DmdDecomposition& dec, const HankelView& view, const std::vector<bool>& support);

/// Geometric warm-started gamma sweep; picks the solution whose number of
/// nonzero conjugate groups is closest to `target_modes` (ties: fewer modes).
/// When no grid point hits the target, the bracketing interval is bisected.
SpdmdSweep gamma_sweep(const SpdmdProblem& problem, Index target_modes, const GammaGrid& grid = {},
                       const AdmmOptions& opts = {});
SpdmdSweep gamma_sweep(const DmdDecomposition& dec, const HankelView& view, Index target_modes,
                       const GammaGrid& grid = {}, const AdmmOptions& opts = {});

/// Copy of `dec` keeping only the modes in `support`, with the given amplitudes.
DmdDecomposition select_modes(const DmdDecomposition& dec, const VectorXc& amplitudes,
                              const std::vector<bool>& support);

} // namespace dmdte
