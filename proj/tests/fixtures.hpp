#pragma once

// Shared generators and independent oracles for the test binaries.

#include <random>
#include <vector>

#include "dmdte/dmd.hpp"
#include "dmdte/spdmd.hpp"

namespace fixtures {

using namespace dmdte;

/// Noiseless sum of two damped/undamped conjugate pairs: node i at step t is
/// Re(sum_k m_k[i] a_k l_k^t). `energy_ratio` scales the second pair's
/// amplitude by 1/sqrt(ratio).
inline SignalMatrix two_pair_signal(std::uint64_t seed, double energy_ratio, Index nodes = 3, Index steps = 80) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const cplx l1 = std::polar(0.97 + 0.03 * u(rng), 0.15 + 0.5 * u(rng));
    const cplx l2 = std::polar(0.97 + 0.03 * u(rng), 0.9 + 1.5 * u(rng));
    MatrixXc m(nodes, 2);
    for (Index i = 0; i < m.size(); ++i) {
        m(i) = cplx(g(rng), g(rng));
    }
    const cplx a1 = std::polar(1.0, 2 * M_PI * u(rng));
    const cplx a2 = std::polar(1.0 / std::sqrt(energy_ratio), 2 * M_PI * u(rng));
    MatrixXd z(nodes, steps);
    for (Index t = 0; t < steps; ++t) {
        const VectorXc col = m.col(0) * a1 * std::pow(l1, double(t)) + m.col(1) * a2 * std::pow(l2, double(t));
        z.col(t) = 2.0 * col.real();
    }
    return SignalMatrix::from_values(z);
}

struct Fitted {
    HankelView view;
    DmdDecomposition dec;
};

inline Fitted fit_rank4(const SignalMatrix& s, Index tau = 4) {
    DmdConfig cfg;
    cfg.rank_policy = RankPolicy::fixed(4);
    cfg.window = FitWindow::truncated;
    HankelView view = build_hankel(s, tau);
    DmdDecomposition dec = fit_dmd(view, cfg);
    return {view, dec};
}

/// Khatri-Rao design matrix over the fit window: column k = vec(psi_k c_k^T).
inline MatrixXc design_matrix(const DmdDecomposition& dec, const HankelView& view) {
    const HankelView h = dec.window == FitWindow::truncated ? truncated_window(view) : view;
    const Index rows = h.rows();
    const Index cols = h.cols();
    MatrixXc k(rows * cols, dec.rank);
    for (Index m = 0; m < dec.rank; ++m) {
        cplx p(1.0, 0.0);
        for (Index j = 0; j < cols; ++j) {
            k.col(m).segment(j * rows, rows) = dec.modes.col(m) * p;
            p *= dec.eigenvalues(m);
        }
    }
    return k;
}

inline VectorXc data_vector(const DmdDecomposition& dec, const HankelView& view) {
    const HankelView h = dec.window == FitWindow::truncated ? truncated_window(view) : view;
    const MatrixXd dense = h.materialize();
    return Eigen::Map<const VectorXd>(dense.data(), dense.size()).cast<cplx>();
}

/// Restricted least squares straight from the design matrix.
inline VectorXc restricted_lstsq(const MatrixXc& k, const VectorXc& y, const std::vector<bool>& support) {
    std::vector<Index> idx;
    for (Index i = 0; i < static_cast<Index>(support.size()); ++i) {
        if (support[i]) {
            idx.push_back(i);
        }
    }
    MatrixXc sub(k.rows(), static_cast<Index>(idx.size()));
    for (Index i = 0; i < sub.cols(); ++i) {
        sub.col(i) = k.col(idx[i]);
    }
    const VectorXc x = sub.colPivHouseholderQr().solve(y);
    VectorXc out = VectorXc::Zero(k.cols());
    for (Index i = 0; i < sub.cols(); ++i) {
        out(idx[i]) = x(i);
    }
    return out;
}

/// Exhaustive oracle: among conjugate-closed supports with `pairs` groups,
/// the one with the smallest polished residual.
inline std::vector<bool> best_support(const DmdDecomposition& dec, const HankelView& view, Index pairs) {
    const MatrixXc k = design_matrix(dec, view);
    const VectorXc y = data_vector(dec, view);
    const auto groups = conjugate_groups(dec.eigenvalues);
    const Index r = dec.rank;
    std::vector<bool> best;
    double best_loss = 1e300;
    for (unsigned mask = 1; mask < (1u << r); ++mask) {
        std::vector<bool> support(static_cast<std::size_t>(r));
        for (Index i = 0; i < r; ++i) {
            support[i] = (mask >> i) & 1u;
        }
        Index count = 0;
        bool closed = true;
        for (const auto& g : groups) {
            const bool first = support[g.front()];
            for (Index i : g) {
                closed = closed && support[i] == first;
            }
            count += first ? 1 : 0;
        }
        if (!closed || count != pairs) {
            continue;
        }
        const VectorXc a = restricted_lstsq(k, y, support);
        const double loss = (y - k * a).squaredNorm();
        if (loss < best_loss) {
            best_loss = loss;
            best = support;
        }
    }
    return best;
}

} // namespace fixtures
