#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace dmdte;
using namespace fixtures;

namespace {

double rel(const VectorXc& a, const VectorXc& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

double l1_groups(const SpdmdProblem& p, const VectorXc& a) {
    double s = 0.0;
    for (const auto& g : p.groups) {
        double m = 0.0;
        for (Index k : g) {
            m += std::norm(a(k));
        }
        s += (g.size() == 2 ? std::sqrt(2.0) : 1.0) * std::sqrt(m);
    }
    return s;
}

} // namespace

TEST(SpdmdProblem, QuadraticFormMatchesDesignMatrix) {
    const Fitted f = fit_rank4(two_pair_signal(1, 4.0));
    const SpdmdProblem p = spdmd_problem(f.dec, f.view);
    const MatrixXc k = design_matrix(f.dec, f.view);
    const VectorXc y = data_vector(f.dec, f.view);
    EXPECT_LE((p.p - k.adjoint() * k).norm(), 1e-9 * p.p.norm());
    EXPECT_LE((p.q - k.adjoint() * y).norm(), 1e-9 * p.q.norm());
    EXPECT_NEAR(p.s, y.squaredNorm(), 1e-9 * p.s);
    const VectorXc a = f.dec.amplitudes * cplx(0.7, 0.2);
    EXPECT_NEAR(p.loss(a), (y - k * a).squaredNorm(), 1e-8 * p.s);
}

TEST(SpdmdSolve, VanishingPenaltyIsLeastSquares) {
    const Fitted f = fit_rank4(two_pair_signal(2, 4.0));
    const SpdmdProblem p = spdmd_problem(f.dec, f.view);
    const SpdmdSolution sol = spdmd_solve(p, 1e-12 * p.gamma_max());
    const VectorXc ls = restricted_lstsq(design_matrix(f.dec, f.view), data_vector(f.dec, f.view),
                                         std::vector<bool>(4, true));
    EXPECT_EQ(sol.nonzero_count, 4);
    EXPECT_TRUE(sol.converged);
    EXPECT_LE(rel(sol.amplitudes, ls), 1e-6);
}

TEST(SpdmdSolve, FullShrinkageAboveGammaMax) {
    const Fitted f = fit_rank4(two_pair_signal(3, 4.0));
    const SpdmdProblem p = spdmd_problem(f.dec, f.view);
    for (double factor : {1.0 + 1e-9, 2.0, 10.0}) {
        const SpdmdSolution sol = spdmd_solve(p, factor * p.gamma_max());
        EXPECT_EQ(sol.nonzero_count, 0);
        EXPECT_EQ(sol.amplitudes, VectorXc::Zero(4));
    }
    EXPECT_GT(spdmd_solve(p, 0.9 * p.gamma_max()).nonzero_count, 0);
    EXPECT_THROW(spdmd_solve(p, 0.0), ConfigError);
}

TEST(SpdmdSolve, MidpointGammaKeepsTheHighEnergyPair) {
    const Fitted f = fit_rank4(two_pair_signal(4, 100.0));
    const SpdmdProblem p = spdmd_problem(f.dec, f.view);
    const SpdmdSweep sweep = gamma_sweep(p, 1);
    // Midpoint between the first gamma that drops the weak pair and gamma_max.
    double first_single = 0.0;
    for (std::size_t i = 0; i < sweep.path.gammas.size(); ++i) {
        if (sweep.path.solutions[i].group_count == 1) {
            first_single = sweep.path.gammas[i];
            break;
        }
    }
    ASSERT_GT(first_single, 0.0);
    const SpdmdSolution sol = spdmd_solve(p, std::sqrt(first_single * p.gamma_max()));
    EXPECT_EQ(sol.support, best_support(f.dec, f.view, 1));
    EXPECT_EQ(sol.nonzero_count, 2);
}

TEST(Polish, FullSupportAndRestrictedOracle) {
    const Fitted f = fit_rank4(two_pair_signal(5, 9.0));
    const SpdmdProblem p = spdmd_problem(f.dec, f.view);
    const MatrixXc k = design_matrix(f.dec, f.view);
    const VectorXc y = data_vector(f.dec, f.view);
    const std::vector<bool> full(4, true);
    EXPECT_LE(rel(polish(p, full), restricted_lstsq(k, y, full)), 1e-8);

    const auto groups = conjugate_groups(f.dec.eigenvalues);
    std::vector<bool> two(4, false);
    for (Index i : groups.front()) {
        two[i] = true;
    }
    const VectorXc a = polish(f.dec, f.view, two);
    EXPECT_LE(rel(a, restricted_lstsq(k, y, two)), 1e-8);
    for (Index i = 0; i < 4; ++i) {
        if (!two[i]) {
            EXPECT_EQ(a(i), cplx(0.0, 0.0));
        }
    }
    EXPECT_THROW(polish(p, std::vector<bool>(4, false)), ConfigError);
}

TEST(Polish, SingleModeRecoversGeneratorAmplitude) {
    VectorXd v(2);
    v << 2.0, -1.0;
    const SignalMatrix s = SignalMatrix::from_values(v.replicate(1, 12));
    DmdConfig cfg;
    cfg.rank_policy = RankPolicy::fixed(1);
    const HankelView view = build_hankel(s, 1);
    const DmdDecomposition dec = fit_dmd(view, cfg);
    const VectorXc a = polish(dec, view, {true});
    // Unit mode times amplitude reproduces the constant column.
    EXPECT_LE((dec.modes.col(0) * a(0) - v.cast<cplx>()).norm(), 1e-10);
}

TEST(GammaSweep, TargetEqualsRankKeepsEverything) {
    const Fitted f = fit_rank4(two_pair_signal(6, 4.0));
    const SpdmdSweep sweep = gamma_sweep(f.dec, f.view, 2);
    EXPECT_TRUE(sweep.target_reached);
    EXPECT_EQ(sweep.chosen.nonzero_count, 4);
    EXPECT_TRUE(sweep.chosen.polished);
}

TEST(GammaSweep, RankOneSignal) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Constant(2, 10, 1.5));
    DmdConfig cfg;
    cfg.rank_policy = RankPolicy::fixed(1);
    const HankelView view = build_hankel(s, 1);
    const DmdDecomposition dec = fit_dmd(view, cfg);
    const SpdmdSweep sweep = gamma_sweep(dec, view, 1);
    EXPECT_EQ(sweep.chosen.support, std::vector<bool>{true});
    EXPECT_THROW(gamma_sweep(dec, view, 2), ConfigError);
}

TEST(GammaSweep, TwoPairTargetOnStrongWeakSynthetic) {
    const Fitted f = fit_rank4(two_pair_signal(7, 100.0));
    const SpdmdSweep one = gamma_sweep(f.dec, f.view, 1);
    EXPECT_EQ(one.chosen.support, best_support(f.dec, f.view, 1));
    const SpdmdSweep two = gamma_sweep(f.dec, f.view, 2);
    EXPECT_EQ(two.chosen.support, best_support(f.dec, f.view, 2));
}

TEST(GammaSweep, PathProperties) {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const Fitted f = fit_rank4(two_pair_signal(seed, 1.0 + double(seed)));
        const SpdmdProblem p = spdmd_problem(f.dec, f.view);
        const SpdmdSweep sweep = gamma_sweep(p, 1);
        ASSERT_GE(sweep.path.gammas.size(), 50u);
        Index prev = 1000;
        Index rises = 0;
        const VectorXc ls = polish(p, std::vector<bool>(4, true));
        for (std::size_t i = 0; i < sweep.path.solutions.size(); ++i) {
            const SpdmdSolution& s = sweep.path.solutions[i];
            if (i > 0) {
                EXPECT_GT(sweep.path.gammas[i], sweep.path.gammas[i - 1]);
            }
            rises += s.group_count > prev ? 1 : 0;
            EXPECT_LE(s.group_count, prev + 1);
            prev = s.group_count;
            // Conjugate pairs enter and leave together.
            for (const auto& g : p.groups) {
                for (Index k : g) {
                    EXPECT_EQ(s.support[k], s.support[g.front()]);
                }
            }
            // support <=> nonzero amplitude
            for (Index k = 0; k < 4; ++k) {
                EXPECT_EQ(s.support[k], s.amplitudes(k) != cplx(0.0, 0.0));
            }
            // Objective descent against zero and the sanity bound.
            const double objective = s.fit_loss + s.gamma * l1_groups(p, s.amplitudes);
            EXPECT_LE(objective, p.s * (1.0 + 1e-6));
            EXPECT_LE(s.fit_loss, p.loss(ls) + s.gamma * l1_groups(p, ls) + 1e-6 * p.s);
            // Polishing the same support never increases the loss.
            if (s.nonzero_count > 0) {
                EXPECT_LE(p.loss(polish(p, s.support)), s.fit_loss * (1.0 + 1e-12) + 1e-12 * p.s);
            }
        }
        EXPECT_EQ(rises, sweep.monotonicity_violations);
        EXPECT_EQ(rises, 0);
    }
}

TEST(SelectModes, KeepsSupportedColumns) {
    const Fitted f = fit_rank4(two_pair_signal(8, 4.0));
    const SpdmdSweep sweep = gamma_sweep(f.dec, f.view, 1);
    const DmdDecomposition kept = select_modes(f.dec, sweep.chosen.amplitudes, sweep.chosen.support);
    EXPECT_EQ(kept.rank, 2);
    EXPECT_EQ(kept.modes.cols(), 2);
    EXPECT_LE(std::abs(kept.eigenvalues(0) - std::conj(kept.eigenvalues(1))), 1e-8);
}
