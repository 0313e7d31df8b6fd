#include "dmdte/dmd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace dmdte {

namespace {

HankelView fit_view(const HankelView& view, FitWindow window) {
    return window == FitWindow::truncated ? truncated_window(view) : view;
}

// Orders modes by energy contribution, keeping conjugate partners adjacent.
std::vector<Index> contribution_order(const VectorXc& eigenvalues, const VectorXc& amplitudes, Index span) {
    const Index r = eigenvalues.size();
    VectorXd contribution(r);
    for (Index k = 0; k < r; ++k) {
        const double m = std::abs(eigenvalues(k));
        double sum = 0.0;
        double p = 1.0;
        for (Index j = 0; j < span; ++j) {
            sum += p;
            p *= m;
        }
        contribution(k) = std::abs(amplitudes(k)) * sum;
    }
    auto groups = conjugate_groups(eigenvalues);
    std::vector<double> weight(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double w = 0.0;
        for (Index k : groups[g]) {
            w = std::max(w, contribution(k));
        }
        weight[g] = w;
    }
    std::vector<std::size_t> gorder(groups.size());
    std::iota(gorder.begin(), gorder.end(), std::size_t{0});
    std::stable_sort(gorder.begin(), gorder.end(), [&](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });

    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(r));
    for (std::size_t g : gorder) {
        order.insert(order.end(), groups[g].begin(), groups[g].end());
    }
    return order;
}

// Shared tail of exact and total DMD once the (possibly projected) SVD of H is known.
DmdDecomposition finish(const HankelView& h, const HankelView& h_next, const SnapshotSvd<double>& svd,
                        const DmdConfig& cfg, double sampling_seconds) {
    const Index r = svd.rank();
    const VectorXd inv_sigma = svd.singular_values.cwiseInverse();
    const MatrixXd next_v = apply_tall(h_next, svd.right_vectors);
    const MatrixXd reduced = svd.left_vectors.transpose() * next_v * inv_sigma.asDiagonal();

    const auto spectrum = dense_eig(reduced);
    MatrixXc modes = svd.left_vectors.cast<cplx>() * spectrum.eigenvectors;
    for (Index k = 0; k < r; ++k) {
        const double n = modes.col(k).norm();
        if (!(n > 0.0)) {
            throw NumericalError("fit_dmd: degenerate DMD mode");
        }
        modes.col(k) /= n;
    }
    const VectorXc amplitudes = fit_amplitudes(h, modes, spectrum.eigenvalues, cfg.amplitude_method);

    const auto order = contribution_order(spectrum.eigenvalues, amplitudes, h.cols());
    DmdDecomposition dec;
    dec.rank = r;
    dec.eigenvalues.resize(r);
    dec.amplitudes.resize(r);
    dec.modes.resize(modes.rows(), r);
    for (Index k = 0; k < r; ++k) {
        dec.eigenvalues(k) = spectrum.eigenvalues(order[k]);
        dec.amplitudes(k) = amplitudes(order[k]);
        dec.modes.col(k) = modes.col(order[k]);
    }
    dec.sampling_seconds = sampling_seconds;
    dec.fit_span = h.cols();
    dec.tau = h.tau();
    dec.nodes = h.nodes();
    dec.solver = cfg.solver;
    dec.window = cfg.window;
    return dec;
}

void check_fit_input(const HankelView& view) {
    if (view.period() < 3) {
        throw DataError("DMD fit needs at least 3 time steps");
    }
}

} // namespace

Index resolve_rank(const VectorXd& singular_values, const RankPolicy& policy, double tol) {
    if (singular_values.size() == 0 || !(singular_values(0) > 0.0)) {
        throw NumericalError("resolve_rank: empty singular spectrum");
    }
    Index numerical = 0;
    while (numerical < singular_values.size() && singular_values(numerical) > tol * singular_values(0)) {
        ++numerical;
    }
    switch (policy.kind) {
    case RankPolicy::Kind::fixed:
        if (policy.rank <= 0) {
            throw ConfigError("fixed rank must be positive");
        }
        return std::min(policy.rank, numerical);
    case RankPolicy::Kind::cep: {
        if (!(policy.fraction > 0.0 && policy.fraction <= 1.0)) {
            throw ConfigError("CEP threshold must lie in (0, 1]");
        }
        const VectorXd energy = singular_values.head(numerical).array().square();
        const double total = energy.sum();
        double running = 0.0;
        for (Index k = 0; k < numerical; ++k) {
            running += energy(k);
            if (running / total >= policy.fraction - 1e-12) {
                return k + 1;
            }
        }
        return numerical;
    }
    }
    throw ConfigError("unknown rank policy");
}

VectorXc fit_amplitudes(const HankelView& view, const MatrixXc& modes, const VectorXc& eigenvalues,
                        AmplitudeMethod method) {
    const Index r = modes.cols();
    if (modes.rows() != view.rows() || eigenvalues.size() != r) {
        throw ConfigError("fit_amplitudes: modes do not match the lifted dimension");
    }
    if (method == AmplitudeMethod::first_snapshot) {
        const MatrixXd first = apply_tall(view, MatrixXd::Identity(view.cols(), 1));
        return lstsq(modes, first.cast<cplx>()).col(0);
    }

    // Everything outside span(modes) is a constant offset in the objective, so
    // the fit reduces to r x span coordinates in an orthonormal basis Q.
    Eigen::HouseholderQR<MatrixXc> qr(modes);
    const MatrixXc q = qr.householderQ() * MatrixXc::Identity(modes.rows(), r);
    const MatrixXc target = apply_transpose(view, q.conjugate()).transpose(); // Q^H H
    const MatrixXc reduced_modes = q.adjoint() * modes;
    const auto c = vandermonde(eigenvalues, view.cols());

    const Index span = view.cols();
    MatrixXc design(r * span, r);
    VectorXc rhs(r * span);
    for (Index j = 0; j < span; ++j) {
        for (Index i = 0; i < r; ++i) {
            const Index row = j * r + i;
            rhs(row) = target(i, j);
            for (Index k = 0; k < r; ++k) {
                design(row, k) = reduced_modes(i, k) * c.entries(k, j);
            }
        }
    }
    return lstsq(design, rhs).col(0);
}

DmdDecomposition fit_dmd(const HankelView& view, const DmdConfig& cfg, double sampling_seconds) {
    check_fit_input(view);
    const HankelView h = fit_view(view, cfg.window);
    const HankelView h_next = shifted_view(h);

    const auto spectrum = gram_spectrum(gram(h), cfg.truncation_tol);
    const Index r = resolve_rank(spectrum.singular_values, cfg.rank_policy, cfg.truncation_tol);
    const auto svd = snapshot_svd(spectrum, [&](const MatrixXd& x) -> MatrixXd { return apply_tall(h, x); }, r);

    DmdDecomposition dec = finish(h, h_next, svd, cfg, sampling_seconds);
    dec.singular_values = spectrum.singular_values;
    return dec;
}

DmdDecomposition fit_tdmd(const HankelView& view, const DmdConfig& cfg, double sampling_seconds) {
    check_fit_input(view);
    const HankelView h = fit_view(view, cfg.window);
    const HankelView h_next = shifted_view(h);

    const MatrixXd g = gram(h);
    const auto spectrum = gram_spectrum(g, cfg.truncation_tol);
    const Index r = resolve_rank(spectrum.singular_values, cfg.rank_policy, cfg.truncation_tol);

    // Leading right-singular subspace of the stacked pair [H; H'].
    const auto stacked = gram_spectrum(MatrixXd(g + gram(h_next)), cfg.truncation_tol);
    const Index rp = std::min(r, stacked.numerical_rank());
    if (rp < 1) {
        throw NumericalError("fit_tdmd: stacked snapshot matrix is numerically zero");
    }
    const MatrixXd basis = stacked.right_vectors.leftCols(rp);

    // SVD of the projected H P through the r x r compressed Gram matrix.
    const MatrixXd compressed = basis.transpose() * g * basis;
    const auto small = gram_spectrum(MatrixXd(0.5 * (compressed + compressed.transpose())), cfg.truncation_tol);
    if (small.numerical_rank() == 0) {
        throw NumericalError("fit_tdmd: projected snapshots are numerically zero");
    }
    GramSpectrum<double> projected;
    projected.singular_values = small.singular_values;
    projected.right_vectors = basis * small.right_vectors;

    const auto svd =
        snapshot_svd(projected, [&](const MatrixXd& x) -> MatrixXd { return apply_tall(h, x); }, rp);
    DmdDecomposition dec = finish(h, h_next, svd, cfg, sampling_seconds);
    dec.singular_values = spectrum.singular_values;
    return dec;
}

DmdDecomposition fit(const HankelView& view, const DmdConfig& cfg, double sampling_seconds) {
    return cfg.solver == DmdSolver::total ? fit_tdmd(view, cfg, sampling_seconds)
                                          : fit_dmd(view, cfg, sampling_seconds);
}

VandermondeMatrix vandermonde(const VectorXc& eigenvalues, Index length) {
    if (length <= 0) {
        throw ConfigError("vandermonde: length must be positive");
    }
    VandermondeMatrix v;
    v.eigenvalues = eigenvalues;
    v.entries.resize(eigenvalues.size(), length);
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        cplx p(1.0, 0.0);
        for (Index j = 0; j < length; ++j) {
            v.entries(i, j) = p;
            p *= eigenvalues(i);
        }
    }
    return v;
}

MatrixXc reconstruct_complex(const DmdDecomposition& dec, Index length) {
    const auto c = vandermonde(dec.eigenvalues, length);
    return dec.modes * dec.amplitudes.asDiagonal() * c.entries;
}

MatrixXd reconstruct(const DmdDecomposition& dec, Index length) {
    return reconstruct_complex(dec, length).real();
}

ModeFrequency mode_frequency(cplx eigenvalue, double step_seconds) {
    if (eigenvalue == cplx(0.0, 0.0)) {
        throw ConfigError("mode_frequency: zero eigenvalue");
    }
    ModeFrequency f;
    f.growth_rate = std::log(std::abs(eigenvalue));
    const double angle = std::abs(std::arg(eigenvalue));
    if (angle > 0.0) {
        f.period_steps = 2.0 * std::numbers::pi / angle;
        f.period_seconds = *f.period_steps * step_seconds;
    }
    return f;
}

std::vector<std::vector<Index>> conjugate_groups(const VectorXc& eigenvalues, double tol) {
    const Index r = eigenvalues.size();
    std::vector<bool> used(static_cast<std::size_t>(r), false);
    std::vector<std::vector<Index>> groups;
    for (Index i = 0; i < r; ++i) {
        if (used[i]) {
            continue;
        }
        used[i] = true;
        const cplx li = eigenvalues(i);
        const double scale = std::max(1.0, std::abs(li));
        if (std::abs(li.imag()) <= tol * scale) {
            groups.push_back({i});
            continue;
        }
        Index partner = -1;
        double best = tol * scale;
        for (Index j = i + 1; j < r; ++j) {
            if (used[j]) {
                continue;
            }
            const double d = std::abs(eigenvalues(j) - std::conj(li));
            if (d <= best) {
                best = d;
                partner = j;
            }
        }
        if (partner < 0) {
            groups.push_back({i});
            continue;
        }
        used[partner] = true;
        if (li.imag() > 0.0) {
            groups.push_back({i, partner});
        } else {
            groups.push_back({partner, i});
        }
    }
    return groups;
}

std::string to_string(DmdSolver solver) { return solver == DmdSolver::total ? "total" : "exact"; }
std::string to_string(FitWindow window) { return window == FitWindow::truncated ? "truncated" : "circulant"; }

} // namespace dmdte
