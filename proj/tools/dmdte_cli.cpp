#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dmdte/pipeline.hpp"

namespace {

using namespace dmdte;

struct PipelineFlags {
    std::string input;
    bool synthetic = false;
    Index nodes = 8;
    Index steps = 2016;
    std::vector<double> periods{72.0, 504.0};
    std::vector<double> amplitudes;
    double noise = 0.1;
    double trend = 0.0;
    std::uint64_t seed = 0;
    double step_seconds = 1.0;
    Index tau = 0;
    Index rank = 0;
    double cep = 0.90;
    std::string solver = "exact";
    std::string window = "truncated";
    Index modes = 4;
    bool no_unit_circle = false;
    Index history = 12;
    Index horizon = 12;
    std::vector<double> split{0.7, 0.1, 0.2};
    std::string l2 = "0.001";
    std::vector<long> lags{0, 72, 504};
    Index acf_max_lag = 168;
    bool keep_matrices = false;
    std::string out = "out";
    std::string manifest;
};

SyntheticSpec synthetic_spec(const PipelineFlags& f) {
    SyntheticSpec s;
    s.nodes = f.nodes;
    s.steps = f.steps;
    s.noise_sigma = f.noise;
    s.trend = f.trend;
    s.components.clear();
    if (!f.amplitudes.empty() && f.amplitudes.size() != f.periods.size()) {
        throw ConfigError("--amplitudes needs one value per period");
    }
    for (std::size_t c = 0; c < f.periods.size(); ++c) {
        s.components.push_back({f.periods[c], f.amplitudes.empty() ? 1.0 : f.amplitudes[c], {}});
    }
    return s;
}

void add_synthetic_flags(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--nodes", f.nodes, "Synthetic node count")->capture_default_str();
    cmd->add_option("--steps", f.steps, "Synthetic step count")->capture_default_str();
    cmd->add_option("--periods", f.periods, "Component periods in steps")->delimiter(',')->capture_default_str();
    cmd->add_option("--amplitudes", f.amplitudes, "Component amplitudes (default 1 each)")->delimiter(',');
    cmd->add_option("--noise", f.noise, "Noise std relative to the clean RMS")->capture_default_str();
    cmd->add_option("--trend", f.trend, "Linear slope per step")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Generator seed")->capture_default_str();
    cmd->add_option("--step-seconds", f.step_seconds, "Sampling interval")->capture_default_str();
}

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f, bool forecast) {
    cmd->add_option("-i,--input", f.input, "Input CSV (rows = steps, columns = nodes)");
    cmd->add_flag("--synthetic", f.synthetic, "Use generated data instead of --input");
    add_synthetic_flags(cmd, f);
    cmd->add_option("--tau", f.tau, "Hankel depth (0 = automatic)")->capture_default_str();
    cmd->add_option("--rank", f.rank, "Fixed DMD rank (0 = CEP policy)")->capture_default_str();
    cmd->add_option("--cep", f.cep, "Energy fraction for the CEP rank policy")->capture_default_str();
    cmd->add_option("--solver", f.solver, "exact or total")
        ->check(CLI::IsMember({"exact", "total"}))
        ->capture_default_str();
    cmd->add_option("--window", f.window, "Fit window: truncated or circulant")
        ->check(CLI::IsMember({"truncated", "circulant"}))
        ->capture_default_str();
    cmd->add_option("--modes", f.modes, "Conjugate mode groups kept by SPDMD (0 = none)")->capture_default_str();
    cmd->add_option("--history", f.history, "History length P")->capture_default_str();
    cmd->add_option("--horizon", f.horizon, "Forecast horizon Q")->capture_default_str();
    cmd->add_option("--split", f.split, "train,val,test ratios")->delimiter(',')->expected(3)->capture_default_str();
    cmd->add_option("-o,--out", f.out, "Output directory")->capture_default_str();
    if (forecast) {
        cmd->add_flag("--no-unit-circle", f.no_unit_circle, "Keep |lambda| when building covariates");
        cmd->add_option("--l2", f.l2, "Ridge penalty or 'auto'")->capture_default_str();
        cmd->add_option("--lags", f.lags, "Residual correlation lags")->delimiter(',')->capture_default_str();
        cmd->add_option("--acf-max-lag", f.acf_max_lag, "Largest ACF lag")->capture_default_str();
        cmd->add_flag("--keep-matrices", f.keep_matrices, "Write full residual correlation matrices");
        cmd->add_option("--manifest", f.manifest, "Rerun from a manifest.json (other flags except --out ignored)");
    }
}

PipelineConfig to_config(const PipelineFlags& f, const CLI::App* cmd) {
    if (!f.manifest.empty()) {
        std::ifstream in(f.manifest);
        if (!in) {
            throw DataError("cannot open manifest " + f.manifest);
        }
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError("manifest " + f.manifest + ": " + e.what());
        }
        PipelineConfig cfg = config_from_json(j);
        if (cmd->count("--out") > 0 || cfg.output_dir.empty()) {
            cfg.output_dir = f.out;
        }
        return cfg;
    }
    PipelineConfig cfg;
    if (!f.input.empty()) {
        cfg.input = f.input;
    } else if (f.synthetic) {
        cfg.synthetic = synthetic_spec(f);
    } else {
        throw ConfigError("give --input FILE or --synthetic");
    }
    cfg.seed = f.seed;
    cfg.step_seconds = f.step_seconds;
    if (f.tau > 0) {
        cfg.tau = f.tau;
    }
    cfg.rank_policy = f.rank > 0 ? RankPolicy::fixed(f.rank) : RankPolicy::cep(f.cep);
    cfg.solver = f.solver == "total" ? DmdSolver::total : DmdSolver::exact;
    cfg.window = f.window == "circulant" ? FitWindow::circulant : FitWindow::truncated;
    cfg.target_modes = f.modes;
    cfg.unit_circle = !f.no_unit_circle;
    cfg.history = f.history;
    cfg.horizon = f.horizon;
    cfg.ratios = {f.split.at(0), f.split.at(1), f.split.at(2)};
    if (f.l2 == "auto") {
        cfg.l2.reset();
    } else {
        try {
            cfg.l2 = std::stod(f.l2);
        } catch (const std::exception&) {
            throw ConfigError("--l2 must be a number or 'auto'");
        }
    }
    cfg.lags = f.lags;
    cfg.acf_max_lag = f.acf_max_lag;
    cfg.keep_matrices = f.keep_matrices;
    cfg.output_dir = f.out;
    return cfg;
}

void print_summary(const PipelineResult& r) {
    std::printf("nodes %ld, steps %ld, tau %ld, rank %ld\n", long(r.signal.nodes()), long(r.signal.steps()),
                long(r.tau), long(r.decomposition.rank));
    for (Index k = 0; k < r.selected.size(); ++k) {
        const ModeFrequency f = mode_frequency(r.selected(k), r.signal.step_seconds);
        std::printf("mode %ld: lambda = %.6f%+.6fi, |lambda| = %.6f, period = ", long(k + 1), r.selected(k).real(),
                    r.selected(k).imag(), std::abs(r.selected(k)));
        if (f.period_steps) {
            std::printf("%.3f steps\n", *f.period_steps);
        } else {
            std::printf("none\n");
        }
    }
    for (const auto& v : r.variants) {
        std::printf("%-7s covariates: RMSE %.6g, MAE %.6g", v.name.c_str(), v.metrics.overall_rmse,
                    v.metrics.overall_mae);
        for (const auto& [h, rmse] : v.metrics.horizon_rmse) {
            if (rmse) {
                std::printf(", RMSE@%d %.6g", h, *rmse);
            }
        }
        std::printf("\n");
    }
    if (!r.skipped_lags.empty()) {
        std::printf("skipped residual-correlation lags (test split too short):");
        for (long s : r.skipped_lags) {
            std::printf(" %ld", s);
        }
        std::printf("\n");
    }
    if (!r.written.empty()) {
        std::printf("wrote %zu files to %s\n", r.written.size(), r.written.front().parent_path().c_str());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DMD spectral time embeddings and covariate forecasting diagnostics"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file; options go under a [fit], [embed], [forecast] or [synth] section");

    PipelineFlags synth_flags;
    std::string synth_out = "synthetic.csv";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-period dataset as CSV");
    add_synthetic_flags(synth, synth_flags);
    synth->add_option("-o,--out", synth_out, "Output CSV")->capture_default_str();

    PipelineFlags fit_flags;
    auto* fit_cmd = app.add_subcommand("fit", "DMD fit and SPDMD selection");
    add_pipeline_flags(fit_cmd, fit_flags, false);

    PipelineFlags embed_flags;
    auto* embed = app.add_subcommand("embed", "Fit and export the time-embedding covariates");
    add_pipeline_flags(embed, embed_flags, false);
    embed->add_flag("--no-unit-circle", embed_flags.no_unit_circle, "Keep |lambda| when building covariates");

    PipelineFlags forecast_flags;
    auto* forecast = app.add_subcommand("forecast", "Full comparison with and without covariates");
    add_pipeline_flags(forecast, forecast_flags, true);

    std::string pred_path;
    std::string actual_path;
    std::string diag_out = "diagnostics";
    std::vector<long> diag_lags{0, 72, 504};
    Index diag_max_lag = 168;
    bool diag_keep = false;
    auto* diagnose = app.add_subcommand("diagnose", "Residual ACF and lagged correlation of supplied predictions");
    diagnose->add_option("--predictions", pred_path, "Predictions CSV (rows = steps, columns = nodes)")->required();
    diagnose->add_option("--actuals", actual_path, "Actuals CSV in the same layout")->required();
    diagnose->add_option("--lags", diag_lags, "Residual correlation lags")->delimiter(',')->capture_default_str();
    diagnose->add_option("--acf-max-lag", diag_max_lag, "Largest ACF lag")->capture_default_str();
    diagnose->add_flag("--keep-matrices", diag_keep, "Write full correlation matrices");
    diagnose->add_option("-o,--out", diag_out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            const SignalMatrix s = generate_synthetic(synthetic_spec(synth_flags), synth_flags.seed,
                                                      synth_flags.step_seconds);
            write_csv(s, synth_out);
            std::printf("wrote %ld nodes x %ld steps to %s\n", long(s.nodes()), long(s.steps()), synth_out.c_str());
        } else if (diagnose->parsed()) {
            const SignalMatrix pred = load_csv(pred_path);
            const SignalMatrix act = load_csv(actual_path);
            const ResidualDiagnosis d = diagnose_residuals(pred, act, diag_lags, diag_max_lag, diag_keep);
            std::filesystem::create_directories(diag_out);
            const std::filesystem::path dir(diag_out);
            if (!d.acf.empty()) {
                write_acf_csv(d.acf, dir / "acf.csv");
                write_acf_svg(d.acf, dir / "acf.svg", "ACF of residuals");
            }
            for (const auto& s : d.rescorr) {
                const std::string stem = "rescorr_lag" + std::to_string(s.lag);
                write_correlation_csv(s, dir / (stem + ".csv"));
                write_correlation_svg(s, dir / (stem + ".svg"), "Residual correlation, lag " + std::to_string(s.lag));
                std::printf("lag %ld: mean |corr| %.6f over %ld pairs\n", s.lag, s.mean_abs_corr, long(s.pairs));
            }
            for (long s : d.skipped_lags) {
                std::printf("lag %ld skipped: series too short\n", s);
            }
        } else {
            const bool is_fit = fit_cmd->parsed();
            const bool is_embed = embed->parsed();
            const PipelineFlags& f = is_fit ? fit_flags : is_embed ? embed_flags : forecast_flags;
            const CLI::App* cmd = is_fit ? fit_cmd : is_embed ? embed : forecast;
            const Stage stage = is_fit ? Stage::fit : is_embed ? Stage::embed : Stage::forecast;
            print_summary(run_pipeline(to_config(f, cmd), stage));
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(ErrorKind::numerical);
    }
    return 0;
}
