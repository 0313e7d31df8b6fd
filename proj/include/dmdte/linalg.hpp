#pragma once

// Dense kernels shared by the spectral modules: method-of-snapshots SVD,
// small eigendecompositions and least-squares solves. Everything here is
// templated on the scalar type and works on Eigen expressions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "dmdte/errors.hpp"

namespace dmdte {

using Index = Eigen::Index;
using cplx = std::complex<double>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using MatrixXc = Matrix<cplx>;
using VectorXc = Vector<cplx>;

/// Singular values below tol * sigma_1 are dropped.
inline constexpr double kTruncationTol = 1e-10;

namespace detail {

template <typename T>
struct real_of {
    using type = T;
};
template <typename T>
struct real_of<std::complex<T>> {
    using type = T;
};
template <typename T>
using real_of_t = typename real_of<T>::type;

template <typename T>
inline constexpr bool is_complex_v = false;
template <typename T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

// Eigenvalues of a Gram matrix carry absolute error of order eps * lambda_1,
// so anything under this floor cannot be told apart from zero.
template <typename Real>
Real gram_noise_floor(Index n) {
    return Real(1e3) * Real(n) * std::numeric_limits<Real>::epsilon();
}

} // namespace detail

/// Eigen-decomposition of a Gram matrix H^T H, reported as the right singular
/// factors of H: descending singular values, truncated to the numerical rank.
template <typename Real>
struct GramSpectrum {
    Vector<Real> singular_values;
    Matrix<Real> right_vectors;

    Index numerical_rank() const { return singular_values.size(); }
};

template <typename Real>
struct SnapshotSvd {
    Matrix<Real> left_vectors;
    Vector<Real> singular_values;
    Matrix<Real> right_vectors;

    Index rank() const { return singular_values.size(); }
};

template <typename Real>
struct ComplexSpectrum {
    Vector<std::complex<Real>> eigenvalues;
    Matrix<std::complex<Real>> eigenvectors;
};

/// Diagonalizes a symmetric positive semidefinite Gram matrix. Ties in the
/// spectrum keep the eigensolver's column order.
template <typename Derived>
GramSpectrum<typename Derived::Scalar> gram_spectrum(const Eigen::MatrixBase<Derived>& gram,
                                                     typename Derived::Scalar tol = kTruncationTol) {
    using Real = typename Derived::Scalar;
    static_assert(!detail::is_complex_v<Real>, "gram_spectrum expects a real Gram matrix");

    const Index n = gram.rows();
    if (n == 0 || gram.cols() != n) {
        throw ConfigError("gram matrix must be square and non-empty");
    }
    if (!gram.allFinite()) {
        throw NumericalError("gram matrix has non-finite entries");
    }
    const Real scale = gram.cwiseAbs().maxCoeff();
    if (scale > Real(0) && (gram - gram.transpose()).cwiseAbs().maxCoeff() > Real(1e-10) * scale) {
        throw ConfigError("gram matrix is not symmetric");
    }

    Eigen::SelfAdjointEigenSolver<Matrix<Real>> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("symmetric eigensolver did not converge on the gram matrix");
    }
    const auto& evals = eig.eigenvalues();
    const Real top = evals.size() > 0 ? evals.maxCoeff() : Real(0);
    if (evals.minCoeff() < -Real(1e-8) * std::max(top, Real(0)) - std::numeric_limits<Real>::min()) {
        throw ConfigError("gram matrix is not positive semidefinite");
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return evals(a) > evals(b); });

    const Real floor = top * std::max(tol * tol, detail::gram_noise_floor<Real>(n));
    Index kept = 0;
    while (kept < n && top > Real(0) && evals(order[kept]) > floor) {
        ++kept;
    }

    GramSpectrum<Real> out;
    out.singular_values.resize(kept);
    out.right_vectors.resize(n, kept);
    for (Index k = 0; k < kept; ++k) {
        out.singular_values(k) = std::sqrt(evals(order[k]));
        out.right_vectors.col(k) = eig.eigenvectors().col(order[k]);
    }
    return out;
}

/// Method of snapshots: U = H V S^-1 built through `tall`, a callable returning
/// H * x for a (T x k) block x. H itself is never formed here.
template <typename Real, typename TallProduct>
SnapshotSvd<Real> snapshot_svd(const GramSpectrum<Real>& spectrum, TallProduct&& tall, Index rank) {
    if (rank <= 0) {
        throw ConfigError("snapshot_svd: rank must be positive");
    }
    if (spectrum.numerical_rank() == 0) {
        throw NumericalError("snapshot_svd: all singular values are below the truncation tolerance");
    }
    const Index r = std::min(rank, spectrum.numerical_rank());

    SnapshotSvd<Real> svd;
    svd.singular_values = spectrum.singular_values.head(r);
    svd.right_vectors = spectrum.right_vectors.leftCols(r);
    Matrix<Real> hv = tall(svd.right_vectors);
    if (hv.cols() != r) {
        throw ConfigError("snapshot_svd: tall product returned the wrong column count");
    }
    svd.left_vectors = hv * svd.singular_values.cwiseInverse().asDiagonal();

    // Sign convention: the largest-magnitude entry of each left vector is >= 0.
    for (Index k = 0; k < r; ++k) {
        Index arg = 0;
        svd.left_vectors.col(k).cwiseAbs().maxCoeff(&arg);
        if (svd.left_vectors(arg, k) < Real(0)) {
            svd.left_vectors.col(k) *= Real(-1);
            svd.right_vectors.col(k) *= Real(-1);
        }
    }
    return svd;
}

template <typename Derived, typename TallProduct>
SnapshotSvd<typename Derived::Scalar> snapshot_svd(const Eigen::MatrixBase<Derived>& gram, TallProduct&& tall,
                                                   Index rank, typename Derived::Scalar tol = kTruncationTol) {
    if (rank <= 0) {
        throw ConfigError("snapshot_svd: rank must be positive");
    }
    if (rank > gram.rows()) {
        throw ConfigError("snapshot_svd: rank exceeds the number of snapshots");
    }
    return snapshot_svd(gram_spectrum(gram, tol), std::forward<TallProduct>(tall), rank);
}

/// Convenience overload for an explicit (small) matrix.
template <typename Derived>
SnapshotSvd<typename Derived::Scalar> snapshot_svd_dense(const Eigen::MatrixBase<Derived>& h, Index rank,
                                                         typename Derived::Scalar tol = kTruncationTol) {
    using Real = typename Derived::Scalar;
    const Matrix<Real> dense = h;
    const Matrix<Real> gram = dense.transpose() * dense;
    return snapshot_svd(gram, [&](const Matrix<Real>& x) -> Matrix<Real> { return dense * x; }, rank, tol);
}

/// Full eigendecomposition, sorted by descending modulus then descending
/// imaginary part. Real input yields exact conjugate pairs.
template <typename Derived>
auto dense_eig(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    using Real = detail::real_of_t<Scalar>;
    using C = std::complex<Real>;

    if (m.rows() < 1 || m.rows() != m.cols()) {
        throw ConfigError("dense_eig: matrix must be square and non-empty");
    }
    if (!m.allFinite()) {
        throw NumericalError("dense_eig: matrix has non-finite entries");
    }

    Vector<C> values;
    Matrix<C> vectors;
    if constexpr (detail::is_complex_v<Scalar>) {
        Eigen::ComplexEigenSolver<Matrix<Scalar>> es(m.eval(), true);
        if (es.info() != Eigen::Success) {
            throw NumericalError("dense_eig: complex eigensolver did not converge");
        }
        values = es.eigenvalues();
        vectors = es.eigenvectors();
    } else {
        Eigen::EigenSolver<Matrix<Scalar>> es(m.eval(), true);
        if (es.info() != Eigen::Success) {
            throw NumericalError("dense_eig: real eigensolver did not converge");
        }
        values = es.eigenvalues();
        vectors = es.eigenvectors();
    }

    const Index n = values.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const Real ma = std::abs(values(a));
        const Real mb = std::abs(values(b));
        if (ma != mb) {
            return ma > mb;
        }
        return values(a).imag() > values(b).imag();
    });

    ComplexSpectrum<Real> out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Index k = 0; k < n; ++k) {
        out.eigenvalues(k) = values(order[k]);
        out.eigenvectors.col(k) = vectors.col(order[k]);
    }
    return out;
}

/// Least squares min ||A x - b||_F through column-pivoted QR. Throws
/// RankDeficientError when A loses column rank beyond `tol` (relative pivot).
template <typename DerivedA, typename DerivedB>
auto lstsq(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, double tol = 1e-10) {
    using Scalar = typename DerivedA::Scalar;
    if (a.rows() != b.rows()) {
        throw ConfigError("lstsq: row mismatch between A and b");
    }
    if (a.rows() < a.cols()) {
        throw ConfigError("lstsq: A must have at least as many rows as columns");
    }
    Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(a.eval());
    qr.setThreshold(tol);
    if (qr.rank() < a.cols()) {
        throw RankDeficientError("lstsq: A is rank deficient (numerical rank " + std::to_string(qr.rank()) +
                                     " of " + std::to_string(a.cols()) + ")",
                                 qr.rank());
    }
    Matrix<Scalar> x = qr.solve(b.template cast<Scalar>().eval());
    return x;
}

} // namespace dmdte
