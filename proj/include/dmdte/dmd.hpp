#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dmdte/hankel.hpp"
#include "dmdte/linalg.hpp"

namespace dmdte {

struct RankPolicy {
    enum class Kind { fixed, cep };

    Kind kind = Kind::cep;
    Index rank = 0;         ///< used by Kind::fixed
    double fraction = 0.90; ///< used by Kind::cep, in (0, 1]

    static RankPolicy fixed(Index r) { return {Kind::fixed, r, 0.0}; }
    static RankPolicy cep(double f = 0.90) { return {Kind::cep, 0, f}; }
};

enum class DmdSolver { exact, total };
enum class AmplitudeMethod { least_squares, first_snapshot };

/// Which columns of the lifted pair enter the fit. `circulant` uses all T
/// columns with wraparound; `truncated` drops the columns whose next-step
/// snapshot wraps, which removes the bias towards |lambda| = 1.
enum class FitWindow { circulant, truncated };

struct DmdConfig {
    RankPolicy rank_policy = RankPolicy::cep(0.90);
    DmdSolver solver = DmdSolver::exact;
    AmplitudeMethod amplitude_method = AmplitudeMethod::least_squares;
    FitWindow window = FitWindow::circulant;
    double truncation_tol = kTruncationTol;
};

/// Modes live in the lifted (N tau) space with unit 2-norm columns; the first
/// N rows are the data-space modes. Entries are ordered by descending
/// |amplitude| * sum_j |lambda|^j, conjugate pairs adjacent (Im > 0 first).
struct DmdDecomposition {
    VectorXc eigenvalues;
    MatrixXc modes;
    VectorXc amplitudes;
    Index rank = 0;
    double sampling_seconds = 1.0;
    Index fit_span = 0; ///< lifted columns used in the fit
    Index tau = 1;
    Index nodes = 0;
    DmdSolver solver = DmdSolver::exact;
    FitWindow window = FitWindow::circulant;
    VectorXd singular_values; ///< full numerical-rank spectrum of H

    MatrixXc data_modes() const { return modes.topRows(nodes); }
};

struct VandermondeMatrix {
    VectorXc eigenvalues;
    MatrixXc entries; ///< entries(i, j) = lambda_i^j

    Index length() const { return entries.cols(); }
};

struct ModeFrequency {
    std::optional<double> period_steps;
    std::optional<double> period_seconds;
    double growth_rate = 0.0; ///< ln |lambda| per step
};

/// fixed(r) -> min(r, numerical rank); cep(f) -> smallest k whose cumulative
/// energy fraction reaches f.
Index resolve_rank(const VectorXd& singular_values, const RankPolicy& policy, double tol = kTruncationTol);

DmdDecomposition fit_dmd(const HankelView& view, const DmdConfig& cfg, double sampling_seconds = 1.0);

/// Total-least-squares variant: both snapshot sets are projected onto the
/// leading right-singular subspace of the stacked pair [H; H'] first.
DmdDecomposition fit_tdmd(const HankelView& view, const DmdConfig& cfg, double sampling_seconds = 1.0);

/// Dispatches on cfg.solver.
DmdDecomposition fit(const HankelView& view, const DmdConfig& cfg, double sampling_seconds = 1.0);

VandermondeMatrix vandermonde(const VectorXc& eigenvalues, Index length);

MatrixXc reconstruct_complex(const DmdDecomposition& dec, Index length);

/// Re(modes * diag(amplitudes) * C), (N tau) x length.
MatrixXd reconstruct(const DmdDecomposition& dec, Index length);

ModeFrequency mode_frequency(cplx eigenvalue, double step_seconds = 1.0);

/// Indices grouped into conjugate pairs (Im > 0 member first) and real
/// singletons, in order of first appearance.
std::vector<std::vector<Index>> conjugate_groups(const VectorXc& eigenvalues, double tol = 1e-8);

/// Solves min ||target - modes diag(a) C||_F over the fit window of `view`.
VectorXc fit_amplitudes(const HankelView& view, const MatrixXc& modes, const VectorXc& eigenvalues,
                        AmplitudeMethod method);

std::string to_string(DmdSolver solver);
std::string to_string(FitWindow window);

} // namespace dmdte
