#include "dmdte/signal.hpp"

#include <cmath>

namespace dmdte {

void SignalMatrix::validate(Index min_steps) const {
    if (values.rows() < 1) {
        throw DataError("signal has no nodes");
    }
    if (values.cols() < min_steps) {
        throw DataError("signal has " + std::to_string(values.cols()) + " steps, need at least " +
                        std::to_string(min_steps));
    }
    if (mask.rows() != values.rows() || mask.cols() != values.cols()) {
        throw DataError("signal mask shape does not match values");
    }
    if (!node_ids.empty() && static_cast<Index>(node_ids.size()) != values.rows()) {
        throw DataError("node id count does not match signal rows");
    }
    if (!(step_seconds > 0.0)) {
        throw DataError("sampling interval must be positive");
    }
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index t = 0; t < values.cols(); ++t) {
            if (mask(i, t) && !std::isfinite(values(i, t))) {
                throw DataError("non-finite observed value at node " + std::to_string(i) + ", step " +
                                std::to_string(t));
            }
        }
    }
}

SignalMatrix SignalMatrix::slice(Index begin, Index end) const {
    if (begin < 0 || end > steps() || begin > end) {
        throw ConfigError("signal slice out of range");
    }
    SignalMatrix out;
    out.values = values.middleCols(begin, end - begin);
    out.mask = mask.middleCols(begin, end - begin);
    out.node_ids = node_ids;
    out.step_seconds = step_seconds;
    out.origin_step = origin_step + static_cast<long>(begin);
    return out;
}

SignalMatrix SignalMatrix::from_values(MatrixXd values, double step_seconds) {
    SignalMatrix out;
    out.mask = MaskMatrix::Constant(values.rows(), values.cols(), true);
    out.node_ids.reserve(static_cast<std::size_t>(values.rows()));
    for (Index i = 0; i < values.rows(); ++i) {
        out.node_ids.push_back(std::to_string(i));
    }
    out.values = std::move(values);
    out.step_seconds = step_seconds;
    return out;
}

SignalMatrix impute_linear(const SignalMatrix& signal) {
    SignalMatrix out = signal;
    const Index steps = signal.steps();
    for (Index i = 0; i < signal.nodes(); ++i) {
        Index prev = -1;
        for (Index t = 0; t <= steps; ++t) {
            if (t < steps && !signal.mask(i, t)) {
                continue;
            }
            // fill the gap (prev, t)
            const Index gap_begin = prev + 1;
            if (gap_begin < t || (t == steps && gap_begin < steps)) {
                if (prev < 0 && t == steps) {
                    throw DataError("node " + std::to_string(i) + " has no observed values");
                }
                for (Index g = gap_begin; g < t; ++g) {
                    if (prev < 0) {
                        out.values(i, g) = signal.values(i, t);
                    } else if (t == steps) {
                        out.values(i, g) = signal.values(i, prev);
                    } else {
                        const double w = double(g - prev) / double(t - prev);
                        out.values(i, g) = (1.0 - w) * signal.values(i, prev) + w * signal.values(i, t);
                    }
                }
            }
            prev = t;
        }
    }
    out.mask.setConstant(true);
    return out;
}

} // namespace dmdte
