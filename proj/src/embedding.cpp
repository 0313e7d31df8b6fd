#include "dmdte/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dmdte/dmd.hpp"

namespace dmdte {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

cplx power(cplx lambda, long n) {
    if (n == 0) {
        return {1.0, 0.0};
    }
    return std::polar(std::pow(std::abs(lambda), double(n)), double(n) * std::arg(lambda));
}

} // namespace

std::string to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "unknown";
}

Eigen::Ref<const VectorXd> TimeEmbedding::at(long step) const {
    if (!covers(step)) {
        throw ConfigError("embedding does not cover absolute step " + std::to_string(step));
    }
    return table.row(step - first_step).transpose();
}

TimeEmbedding build_embedding(const VectorXc& selected, long t_start, long t_end, bool project_unit_circle,
                              long origin_step) {
    if (t_end <= t_start) {
        throw ConfigError("embedding span is empty");
    }
    const Index r = selected.size();
    for (Index k = 0; k < r; ++k) {
        if (selected(k) == cplx(0.0, 0.0)) {
            throw ConfigError("embedding: zero eigenvalue");
        }
        if (selected(k).imag() < 0.0) {
            throw ConfigError("embedding: eigenvalues must be pair representatives with Im >= 0");
        }
    }

    TimeEmbedding emb;
    emb.eigenvalues = selected;
    emb.origin_step = origin_step;
    emb.first_step = t_start;
    emb.unit_circle_projected = project_unit_circle;
    const Index length = t_end - t_start;
    emb.table.resize(length, 2 * r);
    for (Index k = 0; k < r; ++k) {
        const cplx lambda = project_unit_circle ? selected(k) / std::abs(selected(k)) : selected(k);
        cplx p = power(lambda, t_start - origin_step);
        for (Index row = 0; row < length; ++row) {
            emb.table(row, k) = p.real();
            emb.table(row, r + k) = p.imag();
            p *= lambda;
        }
    }
    return emb;
}

VectorXc pair_representatives(const VectorXc& eigenvalues, double tol) {
    const auto groups = conjugate_groups(eigenvalues, tol);
    VectorXc reps(static_cast<Index>(groups.size()));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        cplx l = eigenvalues(groups[g].front());
        if (groups[g].size() == 1 && std::abs(l.imag()) <= tol * std::max(1.0, std::abs(l))) {
            l = cplx(l.real(), 0.0);
        }
        reps(static_cast<Index>(g)) = l.imag() < 0.0 ? std::conj(l) : l;
    }
    return reps;
}

ForecastWindows attach_covariates(const ForecastWindows& windows, const TimeEmbedding& emb) {
    if (emb.modes() == 0) {
        return windows;
    }
    const Index extra = emb.width();
    const Index p = windows.history;
    const Index q = windows.horizon;

    // Coverage first, so the error names the earliest missing step.
    for (const auto& w : windows.windows) {
        const long first = w.anchor_step - static_cast<long>(p) + 1;
        const long last = w.anchor_step + static_cast<long>(q);
        if (!emb.covers(first)) {
            throw ConfigError("embedding does not cover absolute step " + std::to_string(first));
        }
        if (!emb.covers(last)) {
            const long uncovered = std::max(first, emb.end_step());
            throw ConfigError("embedding does not cover absolute step " + std::to_string(uncovered));
        }
    }

    ForecastWindows out = windows;
    out.covariate_channels = windows.covariate_channels + extra;
    for (auto& w : out.windows) {
        const long first = w.anchor_step - static_cast<long>(p) + 1;
        MatrixXd inputs(p, w.inputs.cols() + extra);
        inputs.leftCols(w.inputs.cols()) = w.inputs;
        inputs.rightCols(extra) = emb.table.middleRows(first - emb.first_step, p);
        w.inputs = std::move(inputs);

        MatrixXd future(q, w.future_covariates.cols() + extra);
        future.leftCols(w.future_covariates.cols()) = w.future_covariates;
        future.rightCols(extra) = emb.table.middleRows(w.anchor_step + 1 - emb.first_step, q);
        w.future_covariates = std::move(future);
    }
    return out;
}

CovariateAttachment attachment_of(const ForecastWindows& windows) {
    return {windows.base_channels, windows.channels()};
}

void export_embedding(const TimeEmbedding& emb, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    const Index r = emb.modes();
    out << "step";
    for (Index k = 1; k <= r; ++k) {
        out << ",re_" << k;
    }
    for (Index k = 1; k <= r; ++k) {
        out << ",im_" << k;
    }
    out << '\n';
    for (Index row = 0; row < emb.length(); ++row) {
        out << (emb.first_step + row);
        for (Index c = 0; c < emb.width(); ++c) {
            out << ',' << format_double(emb.table(row, c));
        }
        out << '\n';
    }
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

TimeEmbedding import_embedding(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": empty embedding file");
    }
    Index columns = 0;
    {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        if (cell != "step") {
            throw DataError(path.string() + ": header must start with 'step'");
        }
        while (std::getline(ss, cell, ',')) {
            ++columns;
        }
    }
    if (columns % 2 != 0) {
        throw DataError(path.string() + ": expected an even number of value columns");
    }

    std::vector<long> steps;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        steps.push_back(std::stol(cell));
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            row.push_back(std::strtod(cell.c_str(), &end));
            if (end == cell.c_str()) {
                throw DataError(path.string() + ": non-numeric cell '" + cell + "'");
            }
        }
        if (static_cast<Index>(row.size()) != columns) {
            throw DataError(path.string() + ": ragged row at step " + std::to_string(steps.back()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw DataError(path.string() + ": embedding file has no rows");
    }
    for (std::size_t i = 1; i < steps.size(); ++i) {
        if (steps[i] != steps[i - 1] + 1) {
            throw DataError(path.string() + ": steps are not consecutive");
        }
    }

    TimeEmbedding emb;
    emb.first_step = steps.front();
    emb.table.resize(static_cast<Index>(rows.size()), columns);
    for (Index i = 0; i < emb.table.rows(); ++i) {
        for (Index c = 0; c < columns; ++c) {
            emb.table(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        }
    }
    const Index r = columns / 2;
    emb.eigenvalues.resize(r);
    bool unit = true;
    for (Index k = 0; k < r; ++k) {
        const cplx z0(emb.table(0, k), emb.table(0, r + k));
        const cplx z1 = emb.length() > 1 ? cplx(emb.table(1, k), emb.table(1, r + k)) : z0;
        emb.eigenvalues(k) = std::abs(z0) > 0.0 ? z1 / z0 : cplx(0.0, 0.0);
        unit = unit && std::abs(std::abs(emb.eigenvalues(k)) - 1.0) <= 1e-10;
    }
    emb.unit_circle_projected = unit;
    return emb;
}

} // namespace dmdte
