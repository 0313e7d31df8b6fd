#include "dmdte/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmdte {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') {
            cell.pop_back();
        }
        cells.push_back(cell);
    }
    if (!line.empty() && (line.back() == ',' || (line.size() > 1 && line.back() == '\r' && line[line.size() - 2] == ','))) {
        cells.emplace_back();
    }
    return cells;
}

bool is_blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

json complex_array(const VectorXc& v) {
    json arr = json::array();
    for (Index k = 0; k < v.size(); ++k) {
        arr.push_back({v(k).real(), v(k).imag()});
    }
    return arr;
}

VectorXc complex_vector(const json& arr) {
    VectorXc v(static_cast<Index>(arr.size()));
    for (std::size_t k = 0; k < arr.size(); ++k) {
        v(static_cast<Index>(k)) = cplx(arr[k].at(0).get<double>(), arr[k].at(1).get<double>());
    }
    return v;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

SignalMatrix load_csv(const std::filesystem::path& path, double step_seconds) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": empty file");
    }
    const auto header = split_csv_line(line);
    if (header.size() < 2) {
        throw DataError(path.string() + ": header needs a step column and at least one node");
    }
    const std::size_t n = header.size() - 1;

    std::vector<std::vector<double>> cols(n);
    std::vector<std::vector<bool>> observed(n);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (is_blank(line)) {
            continue;
        }
        ++row;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(header.size()));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& c = cells[i + 1];
            if (is_blank(c)) {
                cols[i].push_back(0.0);
                observed[i].push_back(false);
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end == c.c_str() || !is_blank(std::string(end))) {
                throw DataError(path.string() + ": non-numeric cell '" + c + "' in row " + std::to_string(row));
            }
            cols[i].push_back(v);
            observed[i].push_back(true);
        }
    }
    if (row < 2) {
        throw DataError(path.string() + ": need at least 2 time steps, found " + std::to_string(row));
    }

    SignalMatrix s;
    s.values.resize(static_cast<Index>(n), static_cast<Index>(row));
    s.mask.resize(static_cast<Index>(n), static_cast<Index>(row));
    for (std::size_t i = 0; i < n; ++i) {
        s.node_ids.push_back(header[i + 1]);
        for (std::size_t t = 0; t < row; ++t) {
            s.values(static_cast<Index>(i), static_cast<Index>(t)) = cols[i][t];
            s.mask(static_cast<Index>(i), static_cast<Index>(t)) = observed[i][t];
        }
    }
    s.step_seconds = step_seconds;
    s.validate();
    return s;
}

void write_csv(const SignalMatrix& signal, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "step";
    for (Index i = 0; i < signal.nodes(); ++i) {
        out << ',' << (i < static_cast<Index>(signal.node_ids.size()) ? signal.node_ids[i] : std::to_string(i));
    }
    out << '\n';
    for (Index t = 0; t < signal.steps(); ++t) {
        out << signal.origin_step + t;
        for (Index i = 0; i < signal.nodes(); ++i) {
            out << ',';
            if (signal.mask.size() == 0 || signal.mask(i, t)) {
                out << format_double(signal.values(i, t));
            }
        }
        out << '\n';
    }
    write_text(path, out.str());
}

json to_json(const DmdDecomposition& dec) {
    json modes = json::array();
    for (Index i = 0; i < dec.modes.rows(); ++i) {
        json row = json::array();
        for (Index k = 0; k < dec.modes.cols(); ++k) {
            row.push_back({dec.modes(i, k).real(), dec.modes(i, k).imag()});
        }
        modes.push_back(std::move(row));
    }
    json freq = json::array();
    for (Index k = 0; k < dec.eigenvalues.size(); ++k) {
        if (dec.eigenvalues(k) == cplx(0.0, 0.0)) {
            freq.push_back(nullptr);
            continue;
        }
        const auto f = mode_frequency(dec.eigenvalues(k), dec.sampling_seconds);
        freq.push_back({{"period_steps", optional_number(f.period_steps)}, {"growth_rate", f.growth_rate}});
    }
    json sv = json::array();
    for (Index k = 0; k < dec.singular_values.size(); ++k) {
        sv.push_back(dec.singular_values(k));
    }
    return {
        {"rank", dec.rank},
        {"tau", dec.tau},
        {"nodes", dec.nodes},
        {"fit_span", dec.fit_span},
        {"sampling_seconds", dec.sampling_seconds},
        {"solver", to_string(dec.solver)},
        {"fit_window", to_string(dec.window)},
        {"eigenvalues", complex_array(dec.eigenvalues)},
        {"amplitudes", complex_array(dec.amplitudes)},
        {"modes", std::move(modes)},
        {"frequencies", std::move(freq)},
        {"singular_values", std::move(sv)},
    };
}

DmdDecomposition decomposition_from_json(const json& j) {
    try {
        DmdDecomposition dec;
        dec.rank = j.at("rank").get<Index>();
        dec.tau = j.at("tau").get<Index>();
        dec.nodes = j.at("nodes").get<Index>();
        dec.fit_span = j.at("fit_span").get<Index>();
        dec.sampling_seconds = j.at("sampling_seconds").get<double>();
        dec.solver = j.at("solver").get<std::string>() == "total" ? DmdSolver::total : DmdSolver::exact;
        dec.window = j.at("fit_window").get<std::string>() == "truncated" ? FitWindow::truncated : FitWindow::circulant;
        dec.eigenvalues = complex_vector(j.at("eigenvalues"));
        dec.amplitudes = complex_vector(j.at("amplitudes"));
        const json& modes = j.at("modes");
        dec.modes.resize(static_cast<Index>(modes.size()), dec.rank);
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const VectorXc row = complex_vector(modes[i]);
            if (row.size() != dec.rank) {
                throw DataError("decomposition JSON: ragged mode row");
            }
            dec.modes.row(static_cast<Index>(i)) = row.transpose();
        }
        const auto sv = j.value("singular_values", std::vector<double>{});
        dec.singular_values = Eigen::Map<const VectorXd>(sv.data(), static_cast<Index>(sv.size()));
        if (dec.eigenvalues.size() != dec.rank || dec.amplitudes.size() != dec.rank) {
            throw DataError("decomposition JSON: array lengths disagree with rank");
        }
        return dec;
    } catch (const json::exception& e) {
        throw DataError(std::string("decomposition JSON: ") + e.what());
    }
}

json to_json(const MetricsReport& report) {
    json horizons = json::object();
    for (const auto& [h, mae] : report.horizon_mae) {
        horizons[std::to_string(h)] = {{"mae", optional_number(mae)},
                                       {"rmse", optional_number(report.horizon_rmse.at(h))}};
    }
    return {
        {"horizons", std::move(horizons)},
        {"overall", {{"mae", report.overall_mae}, {"rmse", report.overall_rmse}}},
        {"excluded_count", report.excluded_count},
        {"evaluated_count", report.evaluated_count},
    };
}

void write_spdmd_path(const SpdmdSweep& sweep, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "gamma,nonzero_count,fit_loss,flags\n";
    Index prev = -1;
    for (std::size_t i = 0; i < sweep.path.solutions.size(); ++i) {
        const auto& s = sweep.path.solutions[i];
        std::string flags;
        if (!s.converged) {
            flags += "nonconverged";
        }
        if (prev >= 0 && s.group_count > prev + 1) {
            flags += flags.empty() ? "nonmonotone" : ";nonmonotone";
        }
        if (s.gamma == sweep.chosen.gamma) {
            flags += flags.empty() ? "chosen" : ";chosen";
        }
        prev = s.group_count;
        out << format_double(sweep.path.gammas[i]) << ',' << s.nonzero_count << ',' << format_double(s.fit_loss)
            << ',' << (flags.empty() ? "ok" : flags) << '\n';
    }
    write_text(path, out.str());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw DataError("cannot open " + tmp.string() + " for writing");
        }
        out << text;
        if (!out) {
            throw DataError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace dmdte
