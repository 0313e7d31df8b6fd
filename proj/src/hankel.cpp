#include "dmdte/hankel.hpp"

#include <algorithm>

namespace dmdte {

HankelView::HankelView(std::shared_ptr<const MatrixXd> source, Index tau, Index offset, Index width)
    : source_(std::move(source)), tau_(tau), offset_(offset), width_(width) {
    if (!source_ || source_->rows() < 1 || source_->cols() < 1) {
        throw DataError("hankel view needs a non-empty source");
    }
    if (tau_ < 1 || tau_ > source_->cols()) {
        throw ConfigError("tau = " + std::to_string(tau_) + " outside [1, " + std::to_string(source_->cols()) + "]");
    }
    if (width_ < 1 || width_ > source_->cols()) {
        throw ConfigError("hankel window width out of range");
    }
    offset_ = ((offset_ % source_->cols()) + source_->cols()) % source_->cols();
}

MatrixXd HankelView::materialize(Index cap) const {
    if (materialized_) {
        return *materialized_;
    }
    if (rows() * cols() > cap) {
        throw ConfigError("hankel materialization of " + std::to_string(rows()) + " x " + std::to_string(cols()) +
                          " exceeds the memory cap");
    }
    MatrixXd out(rows(), cols());
    const Index n = nodes();
    for (Index b = 0; b < tau_; ++b) {
        for (Index j = 0; j < width_; ++j) {
            out.block(b * n, j, n, 1) = source_->col(source_column(b, j));
        }
    }
    return out;
}

HankelView HankelView::with_materialized(Index cap) const {
    HankelView copy = *this;
    copy.materialized_ = std::make_shared<const MatrixXd>(materialize(cap));
    return copy;
}

HankelView build_hankel(const SignalMatrix& signal, Index tau) {
    signal.validate(1);
    if (!signal.fully_observed()) {
        throw DataError("hankel lifting needs imputed data (" + std::to_string(signal.missing_count()) +
                        " missing values)");
    }
    if (tau < 1 || tau > signal.steps()) {
        throw ConfigError("tau = " + std::to_string(tau) + " outside [1, " + std::to_string(signal.steps()) + "]");
    }
    auto source = std::make_shared<const MatrixXd>(signal.values);
    return HankelView(std::move(source), tau, 0, signal.steps());
}

HankelView shifted_view(const HankelView& view) {
    return HankelView(view.shared_source(), view.tau(), view.offset() + 1, view.cols());
}

HankelView truncated_window(const HankelView& view) {
    const Index width = view.period() - view.tau();
    if (width < 1) {
        throw ConfigError("truncated hankel window is empty (tau must be below T)");
    }
    return HankelView(view.shared_source(), view.tau(), view.offset(), width);
}

MatrixXd gram(const HankelView& view) {
    if (const MatrixXd* dense = view.materialized()) {
        MatrixXd g = dense->transpose() * *dense;
        return g.triangularView<Eigen::Upper>().toDenseMatrix().selfadjointView<Eigen::Upper>();
    }
    const MatrixXd& src = view.source();
    const Index period = view.period();
    const Index width = view.cols();
    const Index tau = view.tau();
    const MatrixXd base = src.transpose() * src;

    auto at = [&](Index a, Index b) { return base(a % period, b % period); };
    auto direct = [&](Index j, Index k) {
        double s = 0.0;
        for (Index b = 0; b < tau; ++b) {
            s += at(j + view.offset() + b, k + view.offset() + b);
        }
        return s;
    };

    // Walk each diagonal with a sliding window over the tau blocks; restart
    // from a direct sum periodically to bound the accumulated rounding.
    constexpr Index kRestart = 64;
    MatrixXd g(width, width);
    for (Index d = 0; d < width; ++d) {
        double s = 0.0;
        for (Index j = 0; j + d < width; ++j) {
            const Index k = j + d;
            if (j % kRestart == 0) {
                s = direct(j, k);
            } else {
                const Index o = view.offset();
                s += at(j - 1 + o + tau, k - 1 + o + tau) - at(j - 1 + o, k - 1 + o);
            }
            g(j, k) = s;
            g(k, j) = s;
        }
    }
    return g;
}

Index default_tau(Index nodes, Index steps, Index cap) {
    if (nodes < 1 || steps < 1) {
        throw ConfigError("default_tau: empty signal");
    }
    const Index wanted = (2 * steps + nodes - 1) / nodes;
    const Index by_memory = std::max<Index>(1, cap / (nodes * steps));
    return std::max<Index>(1, std::min({steps, wanted, by_memory}));
}

} // namespace dmdte
