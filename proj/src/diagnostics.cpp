#include "dmdte/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmdte {

namespace {

std::string fmt(double v, int digits = 17) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    return out;
}

// Columns centered and scaled to unit norm; zero-variance columns flagged.
MatrixXd standardize(const MatrixXd& block, std::vector<bool>& valid) {
    MatrixXd out = block.rowwise() - block.colwise().mean();
    valid.assign(static_cast<std::size_t>(block.cols()), true);
    for (Index c = 0; c < out.cols(); ++c) {
        const double n = out.col(c).norm();
        const double scale = block.col(c).cwiseAbs().maxCoeff();
        if (!(n > 1e-12 * std::max(scale, 1e-300)) || n == 0.0) {
            valid[c] = false;
            out.col(c).setZero();
        } else {
            out.col(c) /= n;
        }
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

AcfReport acf(const VectorXd& series, Index max_lag, std::string node_id) {
    const Index n = series.size();
    if (max_lag < 1 || n <= max_lag) {
        throw ConfigError("acf: need 1 <= max_lag < series length");
    }
    if (!series.allFinite()) {
        throw DataError("acf: non-finite values in series");
    }
    const VectorXd centered = series.array() - series.mean();
    const double denom = centered.squaredNorm();
    if (!(denom > 0.0)) {
        throw DataError("acf: constant series");
    }
    AcfReport report;
    report.node_id = std::move(node_id);
    report.acf.resize(max_lag + 1);
    report.acf(0) = 1.0;
    report.lags.push_back(0);
    for (Index k = 1; k <= max_lag; ++k) {
        const double num = centered.head(n - k).dot(centered.tail(n - k));
        report.acf(k) = std::clamp(num / denom, -1.0, 1.0);
        report.lags.push_back(k);
    }
    const double threshold = 2.0 / std::sqrt(double(n));
    for (Index k = 1; k <= max_lag; ++k) {
        const double v = report.acf(k);
        if (v > threshold && v > report.acf(k - 1) && (k == max_lag || v >= report.acf(k + 1))) {
            report.peak_lags.push_back(k);
        }
    }
    return report;
}

ResidualCorrSummary residual_correlation(const MatrixXd& residuals, long lag, bool keep_matrix) {
    const Index t = residuals.rows();
    const Index s = static_cast<Index>(std::abs(lag));
    if (s >= t) {
        throw ConfigError("residual_correlation: lag " + std::to_string(lag) + " needs more than " +
                          std::to_string(t) + " time steps");
    }
    if (t - s < 2) {
        throw ConfigError("residual_correlation: fewer than two aligned time pairs");
    }
    const Index len = t - s;
    const MatrixXd now = lag >= 0 ? residuals.middleRows(s, len) : residuals.topRows(len);
    const MatrixXd past = lag >= 0 ? residuals.topRows(len) : residuals.middleRows(s, len);

    std::vector<bool> valid_now;
    std::vector<bool> valid_past;
    const MatrixXd a = standardize(now, valid_now);
    const MatrixXd b = standardize(past, valid_past);

    ResidualCorrSummary out;
    out.lag = lag;
    out.pairs = len;
    for (std::size_t c = 0; c < valid_now.size(); ++c) {
        out.excluded_columns += (valid_now[c] && valid_past[c]) ? 0 : 1;
    }

    const MatrixXd corr = (a.transpose() * b).cwiseMax(-1.0).cwiseMin(1.0);
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < corr.rows(); ++i) {
        if (!valid_now[i]) {
            continue;
        }
        for (Index j = 0; j < corr.cols(); ++j) {
            if (valid_past[j]) {
                sum += std::abs(corr(i, j));
                ++count;
            }
        }
    }
    if (count == 0) {
        throw DataError("residual_correlation: every residual column has zero variance");
    }
    out.mean_abs_corr = std::min(1.0, sum / double(count));
    if (keep_matrix) {
        out.matrix = corr;
    }
    return out;
}

CepCurve cep_curve(const VectorXd& singular_values) {
    if (singular_values.size() == 0) {
        throw ConfigError("cep_curve: empty spectrum");
    }
    const VectorXd energy = singular_values.array().square();
    const double total = energy.sum();
    if (!(total > 0.0)) {
        throw NumericalError("cep_curve: all-zero spectrum");
    }
    CepCurve c;
    c.cep.resize(energy.size());
    double running = 0.0;
    for (Index k = 0; k < energy.size(); ++k) {
        running += energy(k);
        c.cep(k) = std::min(1.0, running / total);
        c.ranks.push_back(k + 1);
    }
    c.cep(energy.size() - 1) = 1.0;
    return c;
}

void write_acf_csv(const std::vector<AcfReport>& reports, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "lag";
    for (const auto& r : reports) {
        out << ',' << (r.node_id.empty() ? "acf" : r.node_id);
    }
    out << '\n';
    const Index max_lag = reports.empty() ? -1 : reports.front().acf.size() - 1;
    for (Index k = 0; k <= max_lag; ++k) {
        out << k;
        for (const auto& r : reports) {
            out << ',' << (k < r.acf.size() ? fmt(r.acf(k)) : "");
        }
        out << '\n';
    }
}

void write_acf_svg(const std::vector<AcfReport>& reports, const std::filesystem::path& path,
                   const std::string& title) {
    constexpr double w = 720, h = 320, left = 50, right = 20, top = 30, bottom = 35;
    const double pw = w - left - right;
    const double ph = h - top - bottom;
    const Index max_lag = reports.empty() ? 1 : std::max<Index>(1, reports.front().acf.size() - 1);
    auto x = [&](double k) { return left + pw * k / double(max_lag); };
    auto y = [&](double v) { return top + ph * (1.0 - (v + 1.0) / 2.0); };

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << y(0) << "\" x2=\"" << left + pw << "\" y2=\"" << y(0)
        << "\" stroke=\"#888\"/>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double v : {-1.0, -0.5, 0.5, 1.0}) {
        out << "<text x=\"" << left - 6 << "\" y=\"" << y(v) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << v << "</text>\n";
    }
    for (Index k = 0; k <= max_lag; k += std::max<Index>(1, max_lag / 8)) {
        out << "<text x=\"" << x(double(k)) << "\" y=\"" << h - 12
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << k << "</text>\n";
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::ostringstream pts;
        for (Index k = 0; k < reports[i].acf.size(); ++k) {
            pts << fmt(x(double(k)), 6) << ',' << fmt(y(reports[i].acf(k)), 6) << ' ';
        }
        out << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << kPalette[i % 6] << "\" points=\""
            << pts.str() << "\"/>\n";
    }
    out << "</svg>\n";
}

void write_correlation_csv(const ResidualCorrSummary& summary, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "lag,mean_abs_corr,pairs,excluded_columns\n";
    out << summary.lag << ',' << fmt(summary.mean_abs_corr) << ',' << summary.pairs << ','
        << summary.excluded_columns << '\n';
    if (summary.matrix) {
        const MatrixXd& m = *summary.matrix;
        out << "\nrow";
        for (Index j = 0; j < m.cols(); ++j) {
            out << ",c" << j;
        }
        out << '\n';
        for (Index i = 0; i < m.rows(); ++i) {
            out << 'c' << i;
            for (Index j = 0; j < m.cols(); ++j) {
                out << ',' << fmt(m(i, j), 8);
            }
            out << '\n';
        }
    }
}

void write_correlation_svg(const ResidualCorrSummary& summary, const std::filesystem::path& path,
                           const std::string& title) {
    auto out = open_out(path);
    if (!summary.matrix) {
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"40\">"
            << "<text x=\"8\" y=\"24\" font-family=\"sans-serif\" font-size=\"13\">" << title << " ("
            << fmt(summary.mean_abs_corr, 3) << ")</text></svg>\n";
        return;
    }
    const MatrixXd& m = *summary.matrix;
    // Block-average down to at most 200 cells per side.
    const Index cells = std::min<Index>(200, m.rows());
    const double step = double(m.rows()) / double(cells);
    constexpr double size = 400, top = 30;
    const double cell = size / double(cells);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 20 << "\" height=\"" << size + top + 10
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" << title << " ("
        << fmt(summary.mean_abs_corr, 3) << ")</text>\n";
    for (Index i = 0; i < cells; ++i) {
        for (Index j = 0; j < cells; ++j) {
            const Index r0 = static_cast<Index>(double(i) * step);
            const Index r1 = std::max(r0 + 1, static_cast<Index>(double(i + 1) * step));
            const Index c0 = static_cast<Index>(double(j) * step);
            const Index c1 = std::max(c0 + 1, static_cast<Index>(double(j + 1) * step));
            const double v = m.block(r0, c0, r1 - r0, c1 - c0).cwiseAbs().mean();
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(v, 0.0, 1.0))));
            out << "<rect x=\"" << fmt(10 + cell * double(j), 6) << "\" y=\"" << fmt(top + cell * double(i), 6)
                << "\" width=\"" << fmt(cell, 6) << "\" height=\"" << fmt(cell, 6) << "\" fill=\"rgb(255,"
                << shade << ',' << shade << ")\"/>\n";
        }
    }
    out << "</svg>\n";
}

void write_cep_csv(const CepCurve& curve, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "rank,cep\n";
    for (std::size_t k = 0; k < curve.ranks.size(); ++k) {
        out << curve.ranks[k] << ',' << fmt(curve.cep(static_cast<Index>(k))) << '\n';
    }
}

void write_cep_svg(const CepCurve& curve, const std::filesystem::path& path) {
    constexpr double w = 480, h = 300, left = 45, top = 25, pw = 410, ph = 235;
    const double n = double(std::max<std::size_t>(1, curve.ranks.size()));
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">CEP</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    std::ostringstream pts;
    for (std::size_t k = 0; k < curve.ranks.size(); ++k) {
        const double x = left + pw * double(k + 1) / n;
        const double y = top + ph * (1.0 - curve.cep(static_cast<Index>(k)));
        pts << fmt(x, 6) << ',' << fmt(y, 6) << ' ';
    }
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    out << "</svg>\n";
}

} // namespace dmdte
