#include "dmdte/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <system_error>

namespace dmdte {

namespace fs = std::filesystem;

namespace {

// --- config (de)serialization ---------------------------------------------

json rank_policy_json(const RankPolicy& p) {
    if (p.kind == RankPolicy::Kind::fixed) {
        return {{"kind", "fixed"}, {"rank", p.rank}};
    }
    return {{"kind", "cep"}, {"fraction", p.fraction}};
}

RankPolicy rank_policy_from(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "fixed") {
        return RankPolicy::fixed(j.at("rank").get<Index>());
    }
    if (kind == "cep") {
        return RankPolicy::cep(j.at("fraction").get<double>());
    }
    throw ConfigError("unknown rank policy kind '" + kind + "'");
}

DmdSolver solver_from(const std::string& s) {
    if (s == "exact") {
        return DmdSolver::exact;
    }
    if (s == "total") {
        return DmdSolver::total;
    }
    throw ConfigError("unknown solver '" + s + "' (expected exact or total)");
}

FitWindow window_from(const std::string& s) {
    if (s == "circulant") {
        return FitWindow::circulant;
    }
    if (s == "truncated") {
        return FitWindow::truncated;
    }
    throw ConfigError("unknown fit window '" + s + "' (expected circulant or truncated)");
}

json synthetic_json(const SyntheticSpec& s) {
    json comps = json::array();
    for (const auto& c : s.components) {
        comps.push_back({{"period_steps", c.period_steps},
                         {"amplitude", c.amplitude},
                         {"profile_seed", c.profile_seed ? json(*c.profile_seed) : json(nullptr)}});
    }
    return {{"nodes", s.nodes},   {"steps", s.steps}, {"components", std::move(comps)},
            {"noise_sigma", s.noise_sigma}, {"trend", s.trend}};
}

SyntheticSpec synthetic_from(const json& j) {
    SyntheticSpec s;
    s.nodes = j.value("nodes", s.nodes);
    s.steps = j.value("steps", s.steps);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.trend = j.value("trend", s.trend);
    if (j.contains("components")) {
        s.components.clear();
        for (const auto& c : j.at("components")) {
            SyntheticComponent comp;
            comp.period_steps = c.at("period_steps").get<double>();
            comp.amplitude = c.at("amplitude").get<double>();
            if (c.contains("profile_seed") && !c.at("profile_seed").is_null()) {
                comp.profile_seed = c.at("profile_seed").get<std::uint64_t>();
            }
            s.components.push_back(comp);
        }
    }
    return s;
}

json eigen_json(cplx l, double step_seconds) {
    json e = {{"eigenvalue", {l.real(), l.imag()}}, {"modulus", std::abs(l)}};
    if (l != cplx(0.0, 0.0)) {
        const ModeFrequency f = mode_frequency(l, step_seconds);
        e["period_steps"] = f.period_steps ? json(*f.period_steps) : json(nullptr);
        e["growth_rate"] = f.growth_rate;
    }
    return e;
}

// --- run directory ---------------------------------------------------------

class RunDirectory {
public:
    explicit RunDirectory(fs::path dir) : dir_(std::move(dir)) {
        if (dir_.empty()) {
            return;
        }
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) {
            throw DataError("cannot create output directory " + dir_.string() + ": " + ec.message());
        }
        lock_ = dir_ / ".lock";
        const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw ConfigError("output directory " + dir_.string() + " is locked by another run (" + lock_.string() +
                              ")");
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        locked_ = true;
    }

    RunDirectory(const RunDirectory&) = delete;
    RunDirectory& operator=(const RunDirectory&) = delete;

    ~RunDirectory() {
        if (locked_) {
            std::error_code ec;
            fs::remove(lock_, ec);
        }
    }

    bool active() const { return !dir_.empty(); }

    /// Registers `name` before handing its path to a writer.
    fs::path claim(const std::string& name) {
        const fs::path p = dir_ / name;
        std::error_code ec;
        if (fs::exists(p, ec) && !fs::is_regular_file(p, ec)) {
            throw DataError("output path " + p.string() + " exists and is not a regular file");
        }
        written_.push_back(p);
        return p;
    }

    void discard() {
        std::error_code ec;
        for (const auto& p : written_) {
            if (fs::is_regular_file(p, ec)) {
                fs::remove(p, ec);
            }
            fs::remove(fs::path(p.string() + ".tmp"), ec);
        }
        written_.clear();
    }

    const std::vector<fs::path>& written() const { return written_; }

private:
    fs::path dir_;
    fs::path lock_;
    bool locked_ = false;
    std::vector<fs::path> written_;
};

class StageClock {
public:
    explicit StageClock(std::vector<std::pair<std::string, double>>& out) : out_(out) {}

    template <class F>
    auto run(const std::string& name, F&& body) -> decltype(body()) {
        const auto start = std::chrono::steady_clock::now();
        const auto record = [&] {
            const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
            out_.emplace_back(name, d.count());
        };
        try {
            if constexpr (std::is_void_v<decltype(body())>) {
                body();
                record();
            } else {
                auto r = body();
                record();
                return r;
            }
        } catch (const Error& e) {
            throw Error(e.kind(), "stage '" + name + "': " + e.what());
        } catch (const fs::filesystem_error& e) {
            throw Error(ErrorKind::data, "stage '" + name + "': " + e.what());
        } catch (const json::exception& e) {
            throw Error(ErrorKind::config, "stage '" + name + "': " + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorKind::numerical, "stage '" + name + "': " + e.what());
        }
    }

private:
    std::vector<std::pair<std::string, double>>& out_;
};

// Restores the observation mask after imputation so metrics still exclude gaps.
SignalMatrix impute_keep_mask(const SignalMatrix& s) {
    if (s.steps() == 0) {
        return s;
    }
    SignalMatrix out = impute_linear(s);
    out.mask = s.mask;
    return out;
}

SignalMatrix all_observed(SignalMatrix s) {
    s.mask.setConstant(s.nodes(), s.steps(), true);
    return s;
}

// Residual bookkeeping for one variant: windows are node-major, so anchor a
// of node i sits at row i * anchors + a.
struct Residuals {
    MatrixXd full;   ///< anchors x (nodes * horizon)
    MatrixXd last;   ///< anchors x nodes, final horizon step
};

Residuals arrange(const MatrixXd& errors, Index nodes, Index anchors) {
    const Index q = errors.cols();
    Residuals r;
    r.full.resize(anchors, nodes * q);
    r.last.resize(anchors, nodes);
    for (Index i = 0; i < nodes; ++i) {
        for (Index a = 0; a < anchors; ++a) {
            r.full.row(a).segment(i * q, q) = errors.row(i * anchors + a);
            r.last(a, i) = errors(i * anchors + a, q - 1);
        }
    }
    return r;
}

std::vector<ResidualCorrSummary> correlations(const MatrixXd& residuals, const std::vector<long>& lags, bool keep,
                                              std::vector<long>& skipped) {
    std::vector<ResidualCorrSummary> out;
    for (long s : lags) {
        if (std::abs(s) + 2 > residuals.rows()) {
            if (std::find(skipped.begin(), skipped.end(), s) == skipped.end()) {
                skipped.push_back(s);
            }
            continue;
        }
        out.push_back(residual_correlation(residuals, s, keep));
    }
    return out;
}

std::vector<AcfReport> node_acfs(const MatrixXd& last, const std::vector<std::string>& ids, Index max_lag) {
    std::vector<AcfReport> out;
    for (Index i = 0; i < last.cols(); ++i) {
        out.push_back(acf(last.col(i), max_lag, i < static_cast<Index>(ids.size()) ? ids[i] : std::to_string(i)));
    }
    return out;
}

VectorXd mean_acf(const std::vector<AcfReport>& reports) {
    if (reports.empty()) {
        return {};
    }
    VectorXd m = VectorXd::Zero(reports.front().acf.size());
    for (const auto& r : reports) {
        m += r.acf;
    }
    return m / double(reports.size());
}

json variant_json(const VariantResult& v, const std::vector<long>& lags) {
    json j = to_json(v.metrics);
    j["l2"] = v.l2;
    json rc = json::object();
    for (const auto& s : v.rescorr) {
        rc[std::to_string(s.lag)] = {{"mean_abs_corr", s.mean_abs_corr},
                                     {"pairs", s.pairs},
                                     {"excluded_columns", s.excluded_columns}};
    }
    json at_lags = json::object();
    for (long s : lags) {
        if (s > 0 && s < v.mean_acf.size()) {
            at_lags[std::to_string(s)] = v.mean_acf(s);
        }
    }
    j["residual_correlation"] = std::move(rc);
    j["mean_acf_h12_at_lags"] = std::move(at_lags);
    j["mean_acf_h12"] = std::vector<double>(v.mean_acf.data(), v.mean_acf.data() + v.mean_acf.size());
    return j;
}

} // namespace

// --- synthetic data ----------------------------------------------------------

SignalMatrix generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, double step_seconds) {
    if (spec.nodes < 1 || spec.steps < 2) {
        throw ConfigError("synthetic data needs nodes >= 1 and steps >= 2");
    }
    for (const auto& c : spec.components) {
        if (!(c.period_steps >= 2.0) || !(c.amplitude > 0.0)) {
            throw ConfigError("synthetic components need period >= 2 steps and amplitude > 0");
        }
    }
    if (!(spec.noise_sigma >= 0.0)) {
        throw ConfigError("synthetic noise_sigma must be nonnegative");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> profile(0.5, 1.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    const Index n = spec.nodes;
    const Index t = spec.steps;
    MatrixXd z = MatrixXd::Zero(n, t);
    for (const auto& c : spec.components) {
        std::mt19937_64 own(c.profile_seed.value_or(0));
        std::mt19937_64& g = c.profile_seed ? own : rng;
        VectorXd u(n);
        for (Index i = 0; i < n; ++i) {
            u(i) = profile(g);
        }
        const double phi = phase(g);
        const double w = 2.0 * std::numbers::pi / c.period_steps;
        for (Index s = 0; s < t; ++s) {
            z.col(s) += c.amplitude * std::cos(w * double(s) + phi) * u;
        }
    }
    for (Index s = 0; s < t; ++s) {
        z.col(s).array() += spec.trend * double(s);
    }
    if (spec.noise_sigma > 0.0) {
        const double rms = std::sqrt(z.squaredNorm() / double(z.size()));
        std::normal_distribution<double> noise(0.0, spec.noise_sigma * rms);
        for (Index i = 0; i < n; ++i) {
            for (Index s = 0; s < t; ++s) {
                z(i, s) += noise(rng);
            }
        }
    }
    SignalMatrix out = SignalMatrix::from_values(std::move(z), step_seconds);
    out.node_ids.clear();
    for (Index i = 0; i < n; ++i) {
        out.node_ids.push_back("node" + std::to_string(i));
    }
    return out;
}

std::string to_string(Stage stage) {
    switch (stage) {
    case Stage::fit: return "fit";
    case Stage::embed: return "embed";
    case Stage::forecast: return "forecast";
    }
    return "unknown";
}

// --- config ------------------------------------------------------------------

json to_json(const PipelineConfig& cfg) {
    return {
        {"input", cfg.input ? json(cfg.input->string()) : json(nullptr)},
        {"synthetic", cfg.synthetic ? synthetic_json(*cfg.synthetic) : json(nullptr)},
        {"step_seconds", cfg.step_seconds},
        {"tau", cfg.tau ? json(*cfg.tau) : json(nullptr)},
        {"rank_policy", rank_policy_json(cfg.rank_policy)},
        {"solver", to_string(cfg.solver)},
        {"fit_window", to_string(cfg.window)},
        {"target_modes", cfg.target_modes},
        {"gamma_grid", {{"points", cfg.gamma_grid.points}, {"lower_ratio", cfg.gamma_grid.lower_ratio}}},
        {"admm",
         {{"rho", cfg.admm.rho}, {"tolerance", cfg.admm.tolerance}, {"max_iterations", cfg.admm.max_iterations}}},
        {"unit_circle", cfg.unit_circle},
        {"history", cfg.history},
        {"horizon", cfg.horizon},
        {"split_ratios", {{"train", cfg.ratios.train}, {"val", cfg.ratios.val}, {"test", cfg.ratios.test}}},
        {"l2", cfg.l2 ? json(*cfg.l2) : json("auto")},
        {"lags", cfg.lags},
        {"acf_max_lag", cfg.acf_max_lag},
        {"keep_matrices", cfg.keep_matrices},
        {"output_dir", cfg.output_dir.string()},
        {"seed", cfg.seed},
    };
}

PipelineConfig config_from_json(const json& in) {
    try {
        const json& j = in.contains("config") ? in.at("config") : in;
        PipelineConfig cfg;
        if (j.contains("input") && !j.at("input").is_null()) {
            cfg.input = fs::path(j.at("input").get<std::string>());
        }
        if (j.contains("synthetic") && !j.at("synthetic").is_null()) {
            cfg.synthetic = synthetic_from(j.at("synthetic"));
        }
        cfg.step_seconds = j.value("step_seconds", cfg.step_seconds);
        if (j.contains("tau") && !j.at("tau").is_null()) {
            cfg.tau = j.at("tau").get<Index>();
        }
        if (j.contains("rank_policy")) {
            cfg.rank_policy = rank_policy_from(j.at("rank_policy"));
        }
        if (j.contains("solver")) {
            cfg.solver = solver_from(j.at("solver").get<std::string>());
        }
        if (j.contains("fit_window")) {
            cfg.window = window_from(j.at("fit_window").get<std::string>());
        }
        cfg.target_modes = j.value("target_modes", cfg.target_modes);
        if (j.contains("gamma_grid")) {
            cfg.gamma_grid.points = j.at("gamma_grid").value("points", cfg.gamma_grid.points);
            cfg.gamma_grid.lower_ratio = j.at("gamma_grid").value("lower_ratio", cfg.gamma_grid.lower_ratio);
        }
        if (j.contains("admm")) {
            cfg.admm.rho = j.at("admm").value("rho", cfg.admm.rho);
            cfg.admm.tolerance = j.at("admm").value("tolerance", cfg.admm.tolerance);
            cfg.admm.max_iterations = j.at("admm").value("max_iterations", cfg.admm.max_iterations);
        }
        cfg.unit_circle = j.value("unit_circle", cfg.unit_circle);
        cfg.history = j.value("history", cfg.history);
        cfg.horizon = j.value("horizon", cfg.horizon);
        if (j.contains("split_ratios")) {
            const json& r = j.at("split_ratios");
            cfg.ratios = {r.value("train", 0.7), r.value("val", 0.1), r.value("test", 0.2)};
        }
        if (j.contains("l2")) {
            const json& l = j.at("l2");
            if (l.is_string()) {
                if (l.get<std::string>() != "auto") {
                    throw ConfigError("l2 must be a number or \"auto\"");
                }
                cfg.l2.reset();
            } else {
                cfg.l2 = l.get<double>();
            }
        }
        if (j.contains("lags")) {
            cfg.lags = j.at("lags").get<std::vector<long>>();
        }
        cfg.acf_max_lag = j.value("acf_max_lag", cfg.acf_max_lag);
        cfg.keep_matrices = j.value("keep_matrices", cfg.keep_matrices);
        cfg.output_dir = j.value("output_dir", std::string());
        cfg.seed = j.value("seed", cfg.seed);
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }
}

std::optional<double> VariantResult::rescorr_at(long lag) const {
    for (const auto& s : rescorr) {
        if (s.lag == lag) {
            return s.mean_abs_corr;
        }
    }
    return std::nullopt;
}

const VariantResult& PipelineResult::variant(const std::string& name) const {
    for (const auto& v : variants) {
        if (v.name == name) {
            return v;
        }
    }
    throw ConfigError("no forecast variant named '" + name + "'");
}

// --- pipeline ----------------------------------------------------------------

PipelineResult run_pipeline(const PipelineConfig& cfg, Stage last) {
    if (!cfg.input && !cfg.synthetic) {
        throw ConfigError("pipeline needs an input CSV or a synthetic spec");
    }
    if (cfg.history < 1 || cfg.horizon < 1) {
        throw ConfigError("history and horizon must be positive");
    }
    if (cfg.target_modes < 0) {
        throw ConfigError("target_modes must be nonnegative");
    }
    if (cfg.acf_max_lag < 1) {
        throw ConfigError("acf_max_lag must be at least 1");
    }

    PipelineResult res;
    RunDirectory out(cfg.output_dir);
    StageClock clock(res.stage_seconds);
    PipelineConfig resolved = cfg;
    json manifest_extra = json::object();

    try {
        res.signal = clock.run("ingest", [&] {
            SignalMatrix s = cfg.input ? load_csv(*cfg.input, cfg.step_seconds)
                                       : generate_synthetic(*cfg.synthetic, cfg.seed, cfg.step_seconds);
            s.validate();
            return s;
        });

        clock.run("split", [&] {
            SignalSplits raw = make_splits(res.signal, cfg.ratios, cfg.history + cfg.horizon);
            res.splits = raw;
            res.splits.train = impute_keep_mask(raw.train);
            res.splits.val = impute_keep_mask(raw.val);
            res.splits.test = impute_keep_mask(raw.test);
        });

        res.zscore = clock.run("normalize", [&] { return zscore_fit_apply(res.splits); });

        const SignalMatrix train = all_observed(res.splits.train);
        const HankelView view = clock.run("hankel", [&] {
            // The truncated window keeps T - tau columns; narrow signals would
            // otherwise get tau close to T and almost nothing to fit.
            const Index cap = cfg.window == FitWindow::truncated ? std::max<Index>(1, train.steps() / 2) : train.steps();
            res.tau = cfg.tau.value_or(std::min(cap, default_tau(train.nodes(), train.steps())));
            resolved.tau = res.tau;
            return build_hankel(train, res.tau);
        });

        res.decomposition = clock.run("dmd", [&] {
            DmdConfig dcfg;
            dcfg.rank_policy = cfg.rank_policy;
            dcfg.solver = cfg.solver;
            dcfg.window = cfg.window;
            return fit(view, dcfg, res.signal.step_seconds);
        });

        clock.run("spdmd", [&] {
            if (cfg.target_modes == 0) {
                res.selected.resize(0);
                return;
            }
            // A decomposition with fewer conjugate groups than requested keeps all of them.
            const Index groups = static_cast<Index>(conjugate_groups(res.decomposition.eigenvalues).size());
            const Index target = std::min(cfg.target_modes, groups);
            manifest_extra["target_modes_effective"] = target;
            res.sweep = gamma_sweep(res.decomposition, view, target, cfg.gamma_grid, cfg.admm);
            const DmdDecomposition kept =
                select_modes(res.decomposition, res.sweep->chosen.amplitudes, res.sweep->chosen.support);
            res.selected = pair_representatives(kept.eigenvalues);
        });

        if (out.active()) {
            clock.run("write_fit", [&] {
                write_text(out.claim("decomposition.json"), to_json(res.decomposition).dump(2) + "\n");
                if (res.sweep) {
                    write_spdmd_path(*res.sweep, out.claim("spdmd_path.csv"));
                }
                const CepCurve cep = cep_curve(res.decomposition.singular_values);
                write_cep_csv(cep, out.claim("cep.csv"));
                write_cep_svg(cep, out.claim("cep.svg"));
            });
        }

        if (last != Stage::fit) {
            res.embedding = clock.run("embedding", [&] {
                const long first = res.signal.origin_step;
                TimeEmbedding e = build_embedding(res.selected, first, first + static_cast<long>(res.signal.steps()),
                                                  cfg.unit_circle, 0);
                if (out.active()) {
                    export_embedding(e, out.claim("embedding.csv"));
                }
                return e;
            });
        }

        if (last == Stage::forecast) {
            clock.run("forecast", [&] {
                const Index p = cfg.history;
                const Index q = cfg.horizon;
                const ForecastWindows base_train = make_windows(res.splits.train, Split::train, p, q);
                const ForecastWindows base_val = make_windows(res.splits.val, Split::val, p, q);
                const ForecastWindows base_test = make_windows(res.splits.test, Split::test, p, q);
                if (base_test.empty()) {
                    throw ConfigError("test split is too short for history + horizon windows");
                }
                const Index nodes = res.signal.nodes();
                const Index anchors = base_test.size() / nodes;
                const MatrixXd targets = zscore_invert(res.zscore, target_matrix(base_test));
                const MaskMatrix mask = target_mask(base_test);
                const Index max_lag = std::min<Index>(cfg.acf_max_lag, anchors - 1);
                manifest_extra["acf_max_lag"] = max_lag;

                for (const std::string name : {"without", "with"}) {
                    const bool cov = name == "with";
                    const ForecastWindows tr = cov ? attach_covariates(base_train, res.embedding) : base_train;
                    const ForecastWindows va = cov ? attach_covariates(base_val, res.embedding) : base_val;
                    const ForecastWindows te = cov ? attach_covariates(base_test, res.embedding) : base_test;

                    VariantResult v;
                    v.name = name;
                    v.l2 = cfg.l2 ? *cfg.l2 : select_l2(tr, va, default_l2_grid());
                    const RidgeModel model = fit_ridge(tr, v.l2);
                    const MatrixXd pred = zscore_invert(res.zscore, predict(model, te));
                    v.metrics = evaluate(pred, targets, mask);

                    const Residuals r = arrange(pred - targets, nodes, anchors);
                    v.rescorr = correlations(r.full, cfg.lags, cfg.keep_matrices, res.skipped_lags);
                    if (max_lag >= 1) {
                        v.acf = node_acfs(r.last, res.signal.node_ids, max_lag);
                    }
                    v.mean_acf = mean_acf(v.acf);
                    v.predictions.resize(anchors, nodes);
                    for (Index i = 0; i < nodes; ++i) {
                        for (Index a = 0; a < anchors; ++a) {
                            v.predictions(a, i) = pred(i * anchors + a, q - 1);
                        }
                    }
                    res.variants.push_back(std::move(v));
                }

                if (out.active()) {
                    const auto layout = [&](const MatrixXd& by_anchor, const MaskMatrix* m) {
                        SignalMatrix s = SignalMatrix::from_values(by_anchor.transpose(), res.signal.step_seconds);
                        s.node_ids = res.signal.node_ids;
                        s.origin_step = base_test.windows.front().anchor_step + static_cast<long>(q);
                        if (m != nullptr) {
                            s.mask = *m;
                        }
                        return s;
                    };
                    MatrixXd actual(anchors, nodes);
                    MaskMatrix actual_mask(nodes, anchors);
                    for (Index i = 0; i < nodes; ++i) {
                        for (Index a = 0; a < anchors; ++a) {
                            actual(a, i) = targets(i * anchors + a, q - 1);
                            actual_mask(i, a) = mask(i * anchors + a, q - 1);
                        }
                    }
                    write_csv(layout(actual, &actual_mask), out.claim("actuals_h12_test.csv"));
                    for (const auto& v : res.variants) {
                        write_csv(layout(v.predictions, nullptr), out.claim("predictions_h12_test_" + v.name + ".csv"));
                        if (!v.acf.empty()) {
                            write_acf_csv(v.acf, out.claim("acf_test_" + v.name + ".csv"));
                            write_acf_svg(v.acf, out.claim("acf_test_" + v.name + ".svg"),
                                          "ACF of 12-step test residuals (" + v.name + " covariates)");
                        }
                        for (const auto& s : v.rescorr) {
                            const std::string stem = "rescorr_lag" + std::to_string(s.lag) + "_test_" + v.name;
                            write_correlation_csv(s, out.claim(stem + ".csv"));
                            write_correlation_svg(s, out.claim(stem + ".svg"),
                                                  "Residual correlation, lag " + std::to_string(s.lag) + " (" +
                                                      v.name + " covariates)");
                        }
                    }
                    json metrics = json::object();
                    for (const auto& v : res.variants) {
                        metrics[v.name] = variant_json(v, cfg.lags);
                    }
                    const auto& h_without = res.variants[0].metrics.horizon_rmse;
                    const auto& h_with = res.variants[1].metrics.horizon_rmse;
                    const int hq = static_cast<int>(q);
                    if (h_without.count(hq) && h_without.at(hq) && h_with.at(hq) && *h_without.at(hq) > 0.0) {
                        metrics["rmse_reduction_last_horizon"] = 1.0 - *h_with.at(hq) / *h_without.at(hq);
                    }
                    write_text(out.claim("metrics.json"), metrics.dump(2) + "\n");
                }
            });
        }

        if (out.active()) {
            json selected = json::array();
            for (Index k = 0; k < res.selected.size(); ++k) {
                selected.push_back(eigen_json(res.selected(k), res.signal.step_seconds));
            }
            json timings = json::object();
            for (const auto& [name, secs] : res.stage_seconds) {
                timings[name] = secs;
            }
            json spd = nullptr;
            if (res.sweep) {
                spd = {{"gamma", res.sweep->chosen.gamma},
                       {"group_count", res.sweep->chosen.group_count},
                       {"nonzero_count", res.sweep->chosen.nonzero_count},
                       {"target_reached", res.sweep->target_reached},
                       {"monotonicity_violations", res.sweep->monotonicity_violations}};
            }
            json l2s = json::object();
            for (const auto& v : res.variants) {
                l2s[v.name] = v.l2;
            }
            json manifest = {
                {"stage", to_string(last)},
                {"config", to_json(resolved)},
                {"resolved",
                 {{"nodes", res.signal.nodes()},
                  {"steps", res.signal.steps()},
                  {"tau", res.tau},
                  {"rank", res.decomposition.rank},
                  {"fit_span", res.decomposition.fit_span},
                  {"val_begin", res.splits.val_begin},
                  {"test_begin", res.splits.test_begin},
                  {"zscore", {{"mean", res.zscore.mean(0)}, {"std", res.zscore.std(0)},
                              {"floored", bool(res.zscore.floored.front())}}},
                  {"missing_values", res.signal.missing_count()},
                  {"l2", std::move(l2s)}}},
                {"spdmd", std::move(spd)},
                {"selected_modes", std::move(selected)},
                {"skipped_lags", res.skipped_lags},
                {"stage_seconds", std::move(timings)},
            };
            for (auto& [k, v] : manifest_extra.items()) {
                manifest["resolved"][k] = v;
            }
            json files = json::array();
            for (const auto& p : out.written()) {
                files.push_back(p.filename().string());
            }
            files.push_back("manifest.json");
            manifest["outputs"] = std::move(files);
            write_text(out.claim("manifest.json"), manifest.dump(2) + "\n");
        }
    } catch (...) {
        out.discard();
        throw;
    }
    res.written = out.written();
    return res;
}

ResidualDiagnosis diagnose_residuals(const SignalMatrix& predictions, const SignalMatrix& actuals,
                                     const std::vector<long>& lags, Index max_lag, bool keep_matrices) {
    if (predictions.nodes() != actuals.nodes() || predictions.steps() != actuals.steps()) {
        throw DataError("predictions and actuals must have the same nodes and steps");
    }
    const Index t = predictions.steps();
    const Index n = predictions.nodes();
    // Unobserved residuals take the node's mean residual so they add no structure.
    MatrixXd r(t, n);
    for (Index i = 0; i < n; ++i) {
        double sum = 0.0;
        Index count = 0;
        for (Index s = 0; s < t; ++s) {
            const bool ok = (predictions.mask.size() == 0 || predictions.mask(i, s)) &&
                            (actuals.mask.size() == 0 || actuals.mask(i, s));
            r(s, i) = ok ? predictions.values(i, s) - actuals.values(i, s) : std::nan("");
            if (ok) {
                sum += r(s, i);
                ++count;
            }
        }
        if (count == 0) {
            throw DataError("node " + std::to_string(i) + " has no observed residuals");
        }
        const double mean = sum / double(count);
        for (Index s = 0; s < t; ++s) {
            if (std::isnan(r(s, i))) {
                r(s, i) = mean;
            }
        }
    }
    ResidualDiagnosis out;
    const Index lag_cap = std::min<Index>(max_lag, t - 1);
    if (lag_cap >= 1) {
        out.acf = node_acfs(r, predictions.node_ids, lag_cap);
    }
    out.rescorr = correlations(r, lags, keep_matrices, out.skipped_lags);
    return out;
}

} // namespace dmdte
