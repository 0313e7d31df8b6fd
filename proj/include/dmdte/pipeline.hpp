#pragma once

// End-to-end orchestration: ingest, impute, split, normalize, lift, fit,
// select, embed, forecast with and without covariates, diagnose.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmdte/diagnostics.hpp"
#include "dmdte/dmd.hpp"
#include "dmdte/embedding.hpp"
#include "dmdte/forecast.hpp"
#include "dmdte/io.hpp"
#include "dmdte/spdmd.hpp"

namespace dmdte {

struct SyntheticComponent {
    double period_steps = 72.0;
    double amplitude = 1.0;
    /// Draws this component's spatial profile and phase from its own stream.
    std::optional<std::uint64_t> profile_seed;
};

/// z_t[i] = sum_c A_c u_c[i] cos(2 pi t / p_c + phi_c) + trend t + noise, with
/// u_c[i] ~ U[0.5, 1.5], phi_c ~ U[0, 2 pi) and Gaussian noise whose standard
/// deviation is noise_sigma times the RMS of the clean signal.
struct SyntheticSpec {
    Index nodes = 8;
    Index steps = 2016;
    std::vector<SyntheticComponent> components{{72.0, 1.0, {}}, {504.0, 1.0, {}}};
    double noise_sigma = 0.1;
    double trend = 0.0;
};

SignalMatrix generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, double step_seconds = 1.0);

enum class Stage { fit, embed, forecast };

std::string to_string(Stage stage);

struct PipelineConfig {
    std::optional<std::filesystem::path> input;
    std::optional<SyntheticSpec> synthetic; ///< used when `input` is unset
    double step_seconds = 1.0;

    std::optional<Index> tau; ///< unset: default_tau on the training split, at most T / 2 with the truncated window
    RankPolicy rank_policy = RankPolicy::cep(0.90);
    DmdSolver solver = DmdSolver::exact;
    FitWindow window = FitWindow::truncated;
    Index target_modes = 4; ///< conjugate groups kept by the sweep; 0 disables covariates
    GammaGrid gamma_grid;
    AdmmOptions admm;
    bool unit_circle = true;

    Index history = 12;
    Index horizon = 12;
    SplitRatios ratios;
    std::optional<double> l2 = 1e-3; ///< unset: chosen on the validation split

    std::vector<long> lags{0, 72, 504};
    Index acf_max_lag = 168;
    bool keep_matrices = false;

    /// Empty: run in memory and write nothing.
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
};

json to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const json& j);

struct VariantResult {
    std::string name; ///< "with" or "without"
    double l2 = 0.0;
    MetricsReport metrics;
    std::vector<AcfReport> acf;            ///< per node, 12-step residuals
    std::vector<ResidualCorrSummary> rescorr; ///< per feasible lag
    MatrixXd predictions;                  ///< anchors x nodes, last horizon step, data units
    VectorXd mean_acf;                     ///< node-averaged ACF

    /// Mean absolute residual correlation at `lag`, when computed.
    std::optional<double> rescorr_at(long lag) const;
};

struct PipelineResult {
    SignalMatrix signal;
    SignalSplits splits; ///< imputed, normalized; masks as observed
    ZScore zscore;
    Index tau = 0;
    DmdDecomposition decomposition;
    std::optional<SpdmdSweep> sweep;
    VectorXc selected; ///< pair representatives fed to the embedding
    TimeEmbedding embedding;
    std::vector<VariantResult> variants; ///< without, then with
    std::vector<long> skipped_lags;
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::vector<std::filesystem::path> written;

    const VariantResult& variant(const std::string& name) const;
};

/// Runs the stages up to and including `last`. With an output directory the
/// run owns it through a lock file; on failure every file written so far is
/// removed and the error names the failing stage.
PipelineResult run_pipeline(const PipelineConfig& cfg, Stage last = Stage::forecast);

/// Residual analysis on 12-step predictions and actuals laid out like input
/// data (rows = steps, columns = nodes).
struct ResidualDiagnosis {
    std::vector<AcfReport> acf;
    std::vector<ResidualCorrSummary> rescorr;
    std::vector<long> skipped_lags;
};

ResidualDiagnosis diagnose_residuals(const SignalMatrix& predictions, const SignalMatrix& actuals,
                                     const std::vector<long>& lags, Index max_lag, bool keep_matrices = false);

} // namespace dmdte
