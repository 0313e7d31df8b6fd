#include "dmdte/spdmd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dmdte {

namespace {

constexpr int kBisectionSteps = 40;

double group_weight(const std::vector<Index>& group) { return group.size() == 2 ? std::numbers::sqrt2 : 1.0; }

struct AdmmState {
    VectorXc alpha;
    VectorXc beta;
    VectorXc lambda;
};

void finalize(const SpdmdProblem& problem, SpdmdSolution& sol) {
    const Index r = problem.size();
    sol.support.assign(static_cast<std::size_t>(r), false);
    sol.nonzero_count = 0;
    for (Index k = 0; k < r; ++k) {
        if (sol.amplitudes(k) != cplx(0.0, 0.0)) {
            sol.support[k] = true;
            ++sol.nonzero_count;
        }
    }
    sol.group_count = 0;
    for (const auto& g : problem.groups) {
        bool any = false;
        for (Index k : g) {
            any = any || sol.support[k];
        }
        sol.group_count += any ? 1 : 0;
    }
    sol.fit_loss = problem.loss(sol.amplitudes);
}

// ADMM on the problem normalized by s and the amplitude scale; rho applies to
// the normalized problem.
SpdmdSolution admm(const SpdmdProblem& problem, double gamma, const AdmmOptions& opts, AdmmState& state) {
    if (!(gamma > 0.0)) {
        throw ConfigError("spdmd: gamma must be positive");
    }
    const Index r = problem.size();
    const double c = problem.scale;
    const MatrixXc p = problem.p * (c * c / problem.s);
    const VectorXc q = problem.q * (c / problem.s);
    const double kappa = gamma * c / problem.s / opts.rho;

    const MatrixXc lhs = p + MatrixXc::Identity(r, r) * (opts.rho / 2.0);
    Eigen::LLT<MatrixXc> llt(lhs);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("spdmd: quadratic block is not positive definite");
    }

    if (state.alpha.size() != r) {
        state.alpha = VectorXc::Zero(r);
        state.beta = VectorXc::Zero(r);
        state.lambda = VectorXc::Zero(r);
    }

    SpdmdSolution sol;
    sol.gamma = gamma;
    sol.converged = false;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        state.alpha = llt.solve(q + (opts.rho / 2.0) * (state.beta - state.lambda / opts.rho));
        const VectorXc v = state.alpha + state.lambda / opts.rho;
        VectorXc beta_next = VectorXc::Zero(r);
        for (const auto& g : problem.groups) {
            double m = 0.0;
            for (Index k : g) {
                m += std::norm(v(k));
            }
            m = std::sqrt(m);
            const double t = kappa * group_weight(g);
            if (m > t) {
                const double shrink = 1.0 - t / m;
                for (Index k : g) {
                    beta_next(k) = shrink * v(k);
                }
            }
        }
        state.lambda += opts.rho * (state.alpha - beta_next);
        const double primal = (state.alpha - beta_next).norm();
        const double dual = opts.rho * (beta_next - state.beta).norm();
        state.beta = beta_next;
        if (primal <= opts.tolerance && dual <= opts.tolerance) {
            sol.converged = true;
            ++it;
            break;
        }
    }
    sol.iterations = it;
    sol.amplitudes = state.beta * c;
    finalize(problem, sol);
    return sol;
}

HankelView window_for(const DmdDecomposition& dec, const HankelView& view) {
    if (dec.window == FitWindow::truncated && view.cols() == view.period()) {
        return truncated_window(view);
    }
    return view;
}

} // namespace

double SpdmdProblem::loss(const VectorXc& a) const {
    const double quad = (a.adjoint() * p * a)(0).real();
    const double lin = (q.adjoint() * a)(0).real();
    return std::max(0.0, quad - 2.0 * lin + s);
}

double SpdmdProblem::gamma_max() const {
    double g = 0.0;
    for (const auto& group : groups) {
        double m = 0.0;
        for (Index k : group) {
            m += std::norm(q(k));
        }
        g = std::max(g, 2.0 * std::sqrt(m) / group_weight(group));
    }
    return g;
}

SpdmdProblem spdmd_problem(const DmdDecomposition& dec, const HankelView& view) {
    const HankelView h = window_for(dec, view);
    const Index r = dec.rank;
    if (dec.modes.rows() != h.rows() || dec.modes.cols() != r || dec.eigenvalues.size() != r) {
        throw ConfigError("spdmd: decomposition does not match the lifted dimension of the view");
    }
    if (dec.fit_span != 0 && dec.fit_span != h.cols()) {
        throw ConfigError("spdmd: decomposition fit span does not match the view");
    }
    const auto c = vandermonde(dec.eigenvalues, h.cols());

    SpdmdProblem problem;
    const MatrixXc mode_gram = dec.modes.adjoint() * dec.modes;
    const MatrixXc time_gram = c.entries * c.entries.adjoint();
    problem.p = mode_gram.cwiseProduct(time_gram.conjugate());
    const MatrixXc projected = apply_transpose(h, dec.modes); // H^T modes, span x r
    problem.q.resize(r);
    for (Index k = 0; k < r; ++k) {
        problem.q(k) = std::conj(c.entries.row(k).transpose().cwiseProduct(projected.col(k)).sum());
    }
    // ||H||_F^2 from the source column norms.
    const VectorXd col_norms = h.source().colwise().squaredNorm().transpose();
    double s = 0.0;
    for (Index j = 0; j < h.cols(); ++j) {
        for (Index b = 0; b < h.tau(); ++b) {
            s += col_norms(h.source_column(b, j));
        }
    }
    if (!(s > 0.0)) {
        throw NumericalError("spdmd: lifted data is identically zero");
    }
    problem.s = s;
    const double mean_diag = problem.p.diagonal().real().mean();
    problem.scale = mean_diag > 0.0 ? std::sqrt(s / mean_diag) : 1.0;
    problem.groups = conjugate_groups(dec.eigenvalues);
    return problem;
}

SpdmdSolution spdmd_solve(const SpdmdProblem& problem, double gamma, const AdmmOptions& opts) {
    AdmmState state;
    return admm(problem, gamma, opts, state);
}

SpdmdSolution spdmd_solve(const DmdDecomposition& dec, const HankelView& view, double gamma,
                          const AdmmOptions& opts) {
    return spdmd_solve(spdmd_problem(dec, view), gamma, opts);
}

VectorXc polish(const SpdmdProblem& problem, const std::vector<bool>& support) {
    const Index r = problem.size();
    if (static_cast<Index>(support.size()) != r) {
        throw ConfigError("polish: support length does not match the rank");
    }
    std::vector<Index> idx;
    for (Index k = 0; k < r; ++k) {
        if (support[k]) {
            idx.push_back(k);
        }
    }
    if (idx.empty()) {
        throw ConfigError("polish: empty support");
    }
    const Index m = static_cast<Index>(idx.size());
    MatrixXc sub(m, m);
    VectorXc rhs(m);
    for (Index i = 0; i < m; ++i) {
        rhs(i) = problem.q(idx[i]);
        for (Index j = 0; j < m; ++j) {
            sub(i, j) = problem.p(idx[i], idx[j]);
        }
    }
    VectorXc x;
    Eigen::LDLT<MatrixXc> ldlt(sub);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        x = ldlt.solve(rhs);
    } else {
        x = lstsq(sub, rhs).col(0);
    }
    VectorXc out = VectorXc::Zero(r);
    for (Index i = 0; i < m; ++i) {
        out(idx[i]) = x(i);
    }
    return out;
}

VectorXc polish(const DmdDecomposition& dec, const HankelView& view, const std::vector<bool>& support) {
    return polish(spdmd_problem(dec, view), support);
}

SpdmdSweep gamma_sweep(const SpdmdProblem& problem, Index target_modes, const GammaGrid& grid,
                       const AdmmOptions& opts) {
    const Index max_groups = static_cast<Index>(problem.groups.size());
    if (target_modes < 1 || target_modes > max_groups) {
        throw ConfigError("gamma_sweep: target_modes must lie in [1, " + std::to_string(max_groups) + "]");
    }
    if (grid.points < 2 || !(grid.lower_ratio > 0.0 && grid.lower_ratio < 1.0)) {
        throw ConfigError("gamma_sweep: invalid grid");
    }
    const double gmax = problem.gamma_max();
    if (!(gmax > 0.0)) {
        throw NumericalError("gamma_sweep: degenerate problem (gamma_max = 0)");
    }

    SpdmdSweep sweep;
    AdmmState state;
    const double log_lo = std::log(grid.lower_ratio);
    Index prev = -1;
    for (int k = 0; k < grid.points; ++k) {
        const double frac = double(k) / double(grid.points - 1);
        const double gamma = gmax * std::exp(log_lo * (1.0 - frac));
        SpdmdSolution sol = admm(problem, gamma, opts, state);
        if (prev >= 0 && sol.group_count > prev + 1) {
            ++sweep.monotonicity_violations;
        }
        prev = sol.group_count;
        sweep.path.gammas.push_back(gamma);
        sweep.path.solutions.push_back(std::move(sol));
    }

    // When the grid steps over the target count, bisect in log(gamma) between
    // the bracketing points; the extra solutions join the path in gamma order.
    const auto hits = [&] {
        for (const auto& sol : sweep.path.solutions) {
            if (sol.group_count == target_modes) {
                return true;
            }
        }
        return false;
    };
    if (!hits()) {
        for (std::size_t i = 0; i + 1 < sweep.path.solutions.size(); ++i) {
            if (sweep.path.solutions[i].group_count > target_modes &&
                sweep.path.solutions[i + 1].group_count < target_modes) {
                double lo = sweep.path.gammas[i];
                double hi = sweep.path.gammas[i + 1];
                AdmmState local;
                for (int b = 0; b < kBisectionSteps; ++b) {
                    const double mid = std::sqrt(lo * hi);
                    SpdmdSolution sol = admm(problem, mid, opts, local);
                    const Index count = sol.group_count;
                    sweep.path.gammas.push_back(mid);
                    sweep.path.solutions.push_back(std::move(sol));
                    ++sweep.refinements;
                    if (count == target_modes) {
                        break;
                    }
                    (count > target_modes ? lo : hi) = mid;
                }
                break;
            }
        }
        std::vector<std::size_t> order(sweep.path.gammas.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return sweep.path.gammas[a] < sweep.path.gammas[b]; });
        SpdmdPath sorted;
        for (std::size_t i : order) {
            sorted.gammas.push_back(sweep.path.gammas[i]);
            sorted.solutions.push_back(std::move(sweep.path.solutions[i]));
        }
        sweep.path = std::move(sorted);
    }

    std::size_t best = 0;
    Index best_dist = -1;
    for (std::size_t i = 0; i < sweep.path.solutions.size(); ++i) {
        const auto& sol = sweep.path.solutions[i];
        if (sol.group_count == 0) {
            continue;
        }
        const Index dist = std::abs(sol.group_count - target_modes);
        const Index cur = best_dist < 0 ? 0 : sweep.path.solutions[best].group_count;
        if (best_dist < 0 || dist < best_dist || (dist == best_dist && sol.group_count < cur)) {
            best = i;
            best_dist = dist;
        }
    }
    if (best_dist < 0) {
        throw NumericalError("gamma_sweep: every grid point pruned all modes");
    }
    sweep.target_reached = best_dist == 0;

    const auto& picked = sweep.path.solutions[best];
    SpdmdSolution chosen;
    chosen.gamma = picked.gamma;
    chosen.amplitudes = polish(problem, picked.support);
    chosen.polished = true;
    chosen.converged = picked.converged;
    chosen.iterations = picked.iterations;
    finalize(problem, chosen);
    sweep.chosen = std::move(chosen);
    return sweep;
}

SpdmdSweep gamma_sweep(const DmdDecomposition& dec, const HankelView& view, Index target_modes,
                       const GammaGrid& grid, const AdmmOptions& opts) {
    return gamma_sweep(spdmd_problem(dec, view), target_modes, grid, opts);
}

DmdDecomposition select_modes(const DmdDecomposition& dec, const VectorXc& amplitudes,
                              const std::vector<bool>& support) {
    if (static_cast<Index>(support.size()) != dec.rank || amplitudes.size() != dec.rank) {
        throw ConfigError("select_modes: support length does not match the rank");
    }
    std::vector<Index> idx;
    for (Index k = 0; k < dec.rank; ++k) {
        if (support[k]) {
            idx.push_back(k);
        }
    }
    if (idx.empty()) {
        throw ConfigError("select_modes: empty support");
    }
    DmdDecomposition out = dec;
    const Index m = static_cast<Index>(idx.size());
    out.rank = m;
    out.eigenvalues.resize(m);
    out.amplitudes.resize(m);
    out.modes.resize(dec.modes.rows(), m);
    for (Index i = 0; i < m; ++i) {
        out.eigenvalues(i) = dec.eigenvalues(idx[i]);
        out.amplitudes(i) = amplitudes(idx[i]);
        out.modes.col(i) = dec.modes.col(idx[i]);
    }
    return out;
}

} // namespace dmdte
