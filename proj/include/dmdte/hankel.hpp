#pragma once

// Circulant Hankel (delay) lifting of an N x T signal. Block row b, column j
// holds z_{(j + offset + b) mod T}; the lifted matrix is only formed on request.

#include <memory>
#include <optional>

#include "dmdte/linalg.hpp"
#include "dmdte/signal.hpp"

namespace dmdte {

/// Upper bound on logical elements (N * tau * width) for any materialization.
inline constexpr Index kHankelMemoryCap = 100'000'000;

class HankelView {
public:
    HankelView(std::shared_ptr<const MatrixXd> source, Index tau, Index offset, Index width);

    Index tau() const { return tau_; }
    Index nodes() const { return source_->rows(); }
    /// Length T of the underlying (circular) series.
    Index period() const { return source_->cols(); }
    Index rows() const { return nodes() * tau_; }
    Index cols() const { return width_; }
    Index offset() const { return offset_; }
    bool circulant() const { return width_ == period(); }

    const MatrixXd& source() const { return *source_; }
    const std::shared_ptr<const MatrixXd>& shared_source() const { return source_; }

    /// Source column feeding block row `block` at lifted column `col`.
    Index source_column(Index block, Index col) const { return (col + offset_ + block) % period(); }

    double operator()(Index row, Index col) const {
        return (*source_)(row % nodes(), source_column(row / nodes(), col));
    }

    bool has_materialized() const { return materialized_ != nullptr; }
    const MatrixXd* materialized() const { return materialized_.get(); }

    /// Dense copy of the lifted matrix; ConfigError beyond `cap` elements.
    MatrixXd materialize(Index cap = kHankelMemoryCap) const;

    /// Same view carrying a cached dense copy (used by the implicit products).
    HankelView with_materialized(Index cap = kHankelMemoryCap) const;

private:
    std::shared_ptr<const MatrixXd> source_;
    std::shared_ptr<const MatrixXd> materialized_;
    Index tau_;
    Index offset_;
    Index width_;
};

HankelView build_hankel(const SignalMatrix& signal, Index tau);

/// Companion H': column j is column j + 1 of `view` (mod T).
HankelView shifted_view(const HankelView& view);

/// Non-circulant window: keeps the T - tau columns whose next-step snapshot
/// does not wrap around the end of the series.
HankelView truncated_window(const HankelView& view);

/// H^T H (width x width), built from the source's own Gram matrix without
/// lifting. Exactly symmetric.
MatrixXd gram(const HankelView& view);

/// tau giving N * tau >= 2T where possible, bounded by T and the memory cap.
Index default_tau(Index nodes, Index steps, Index cap = kHankelMemoryCap);

/// H * x for a (width x k) block x, real or complex.
template <typename Derived>
Matrix<typename Derived::Scalar> apply_tall(const HankelView& view, const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    if (x.rows() != view.cols()) {
        throw ConfigError("apply_tall: operand has " + std::to_string(x.rows()) + " rows, view has " +
                          std::to_string(view.cols()) + " columns");
    }
    if (const MatrixXd* dense = view.materialized()) {
        return dense->template cast<Scalar>() * x;
    }
    const Index n = view.nodes();
    const Index period = view.period();
    const Index k = x.cols();

    // Scatter x onto the circle once; block b then reads the source rotated by b.
    Matrix<Scalar> scattered = Matrix<Scalar>::Zero(period, k);
    for (Index j = 0; j < view.cols(); ++j) {
        scattered.row((j + view.offset()) % period) = x.row(j);
    }
    const Matrix<Scalar> src = view.source().template cast<Scalar>();
    Matrix<Scalar> out(view.rows(), k);
    for (Index b = 0; b < view.tau(); ++b) {
        auto block = out.middleRows(b * n, n);
        block.noalias() = src.rightCols(period - b) * scattered.topRows(period - b);
        if (b > 0) {
            block.noalias() += src.leftCols(b) * scattered.bottomRows(b);
        }
    }
    return out;
}

/// H^T * y for an (N tau x k) block y.
template <typename Derived>
Matrix<typename Derived::Scalar> apply_transpose(const HankelView& view, const Eigen::MatrixBase<Derived>& y) {
    using Scalar = typename Derived::Scalar;
    if (y.rows() != view.rows()) {
        throw ConfigError("apply_transpose: operand row count does not match the lifted dimension");
    }
    if (const MatrixXd* dense = view.materialized()) {
        return dense->transpose().template cast<Scalar>() * y;
    }
    const Index n = view.nodes();
    const Index period = view.period();
    const Matrix<Scalar> src_t = view.source().transpose().template cast<Scalar>();
    Matrix<Scalar> out = Matrix<Scalar>::Zero(view.cols(), y.cols());
    for (Index b = 0; b < view.tau(); ++b) {
        const Matrix<Scalar> projected = src_t * y.middleRows(b * n, n);
        for (Index j = 0; j < view.cols(); ++j) {
            out.row(j) += projected.row(view.source_column(b, j));
        }
    }
    return out;
}

} // namespace dmdte
