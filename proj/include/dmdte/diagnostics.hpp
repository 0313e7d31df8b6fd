#pragma once

// Residual-structure diagnostics: autocorrelation, lagged residual
// correlation and the cumulative energy (CEP) curve, plus plot-ready writers.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmdte/linalg.hpp"

namespace dmdte {

struct AcfReport {
    std::string node_id;
    std::vector<Index> lags; ///< 0..max_lag
    VectorXd acf;
    std::vector<Index> peak_lags;
};

struct ResidualCorrSummary {
    long lag = 0;
    double mean_abs_corr = 0.0;
    Index excluded_columns = 0; ///< columns with zero variance in either aligned window
    Index pairs = 0;            ///< aligned time pairs used
    std::optional<MatrixXd> matrix; ///< rows: columns at t, cols: columns at t - lag; excluded entries are 0
};

struct CepCurve {
    std::vector<Index> ranks; ///< 1..n
    VectorXd cep;
};

/// Biased estimator: sum_t (x_t - m)(x_{t+k} - m) / sum_t (x_t - m)^2.
/// Peaks are local maxima (the last lag counts when still rising) above 2 / sqrt(n).
AcfReport acf(const VectorXd& series, Index max_lag, std::string node_id = {});

/// Pearson correlation between every column at t and every column at t - lag.
/// `residuals` is time x (space-horizon). Negative lags are allowed.
ResidualCorrSummary residual_correlation(const MatrixXd& residuals, long lag, bool keep_matrix = false);

CepCurve cep_curve(const VectorXd& singular_values);

void write_acf_csv(const std::vector<AcfReport>& reports, const std::filesystem::path& path);
void write_acf_svg(const std::vector<AcfReport>& reports, const std::filesystem::path& path,
                   const std::string& title);
/// Summary row plus, when present, the full matrix.
void write_correlation_csv(const ResidualCorrSummary& summary, const std::filesystem::path& path);
void write_correlation_svg(const ResidualCorrSummary& summary, const std::filesystem::path& path,
                           const std::string& title);
void write_cep_csv(const CepCurve& curve, const std::filesystem::path& path);
void write_cep_svg(const CepCurve& curve, const std::filesystem::path& path);

} // namespace dmdte
