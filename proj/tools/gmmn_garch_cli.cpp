// Command-line front end: fit, forecast, assess, bootstrap, report, simulate.

#include "gmmn_garch/gmmn_garch.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace gmmn_garch;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

/// Options shared by the commands that build a PipelineConfig.
struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> transform;
    std::optional<long> tau;
    std::optional<int> n_pth;
    std::optional<int> n_rep;
    std::optional<int> n_bt;
};

void add_common(CLI::App* app, CommonOptions& o, bool with_bootstrap) {
    app->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", o.overrides, "override a config entry, e.g. forecast.n_pth=500 (repeatable)");
    app->add_option("--seed", o.seed, "master seed");
    app->add_option("--transform", o.transform, "none, difference or log_returns");
    app->add_option("--tau", o.tau, "number of training rows");
    app->add_option("--n-pth", o.n_pth, "paths per forecast origin");
    app->add_option("--n-rep", o.n_rep, "AMMD replicates");
    if (with_bootstrap) app->add_option("--n-bt", o.n_bt, "bootstrap replicates");
}

/// Config file, then --set entries, then the dedicated flags.
PipelineConfig build_config(const CommonOptions& o) {
    Json tree = Json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ConfigError("config: cannot open '" + o.config_path + "'");
        try {
            tree = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("config: parse error: ") + e.what());
        }
    }
    for (const auto& s : o.overrides) apply_override(tree, s);
    const auto set = [&tree](const std::string& section, const std::string& key, Json v) {
        if (!tree.contains(section)) tree[section] = Json::object();
        tree[section][key] = std::move(v);
    };
    if (o.seed) tree["seed"] = *o.seed;
    if (o.transform) set("dataset", "transform", *o.transform);
    if (o.tau) set("dataset", "tau", *o.tau);
    if (o.n_pth) set("forecast", "n_pth", *o.n_pth);
    if (o.n_rep) set("assess", "n_rep", *o.n_rep);
    if (o.n_bt) set("bootstrap", "n_bt", *o.n_bt);
    return config_from_json(tree);
}

Dataset read_data(const std::string& path, const PipelineConfig& cfg) { return load_dataset(path, cfg.dataset); }

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + p.string() + "'");
    return out;
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& body) {
    auto out = open_out(p);
    body(out);
    if (!out) throw InputError("write to '" + p.string() + "' failed");
    std::cerr << "wrote " << p.string() << '\n';
}

/// Writes to `out` when given, else to stdout.
void emit(const std::string& out, const std::function<void(std::ostream&)>& body) {
    if (out.empty()) body(std::cout);
    else write_file(out, body);
}

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

// ---------------------------------------------------------------------------

int cmd_fit(const CommonOptions& o, const std::string& data, const std::string& out_dir) {
    const PipelineConfig cfg = build_config(o);
    const Dataset ds = read_data(data, cfg);
    const auto hash = config_hash(cfg);
    const auto seed = cfg.require_seed();
    for (const auto& [label, model] : fit_models(cfg, ds)) {
        const fs::path p = fs::path(out_dir) / (label + ".model");
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        save_model(p.string(), {model, hash, seed});
        std::cerr << "wrote " << p.string() << '\n';
    }
    write_file(fs::path(out_dir) / "config.json", [&](std::ostream& s) { s << canonical_config(cfg) << '\n'; });
    return 0;
}

int cmd_forecast(const std::string& model_path, const std::string& data, std::optional<std::uint64_t> seed,
                 std::optional<std::string> transform, int n_pth, int h, std::optional<long> origin,
                 const std::string& out) {
    if (!seed) throw ConfigError("forecast: --seed is required");
    const ModelArtifact art = load_model(model_path);
    DatasetSpec spec;
    if (transform) spec.transform = parse_transform(*transform);
    // The split is irrelevant here; any valid cut will do.
    spec.tau = 1;
    const Dataset ds = load_dataset(data, spec);
    const Eigen::Index t = origin ? static_cast<Eigen::Index>(*origin) : ds.length();
    if (t < 1 || t > ds.length()) throw ConfigError("forecast: --origin must lie in [1, " + std::to_string(ds.length()) + "]");
    if (n_pth < 1 || h < 1) throw ConfigError("forecast: --n-pth and --horizon must be >= 1");
    Rng rng = Rng(*seed).split(stream::kForecast);
    const auto paths = forecast_paths(art.model, ds.values.topRows(t), static_cast<std::size_t>(n_pth),
                                      static_cast<std::size_t>(h), rng);
    emit(out, [&](std::ostream& s) { write_paths(s, paths, ds.columns); });
    return 0;
}

int cmd_assess(const CommonOptions& o, const std::string& data, const std::string& out_dir) {
    const PipelineConfig cfg = build_config(o);
    const Dataset ds = read_data(data, cfg);
    PipelineOptions opt;
    opt.dataset_name = dataset_name(data);
    const auto res = run_pipeline(cfg, ds, opt);
    if (out_dir.empty()) {
        write_metrics(std::cout, res.metrics);
        return 0;
    }
    const fs::path dir(out_dir);
    write_file(dir / "metrics.csv", [&](std::ostream& s) { write_metrics(s, res.metrics); });
    write_file(dir / "scatter.csv", [&](std::ostream& s) { write_scatter(s, res.metrics); });
    write_file(dir / "daily.csv", [&](std::ostream& s) { write_daily(s, res, ds.test()); });
    write_file(dir / "config.json", [&](std::ostream& s) { s << canonical_config(cfg) << '\n'; });
    return 0;
}

int cmd_bootstrap(const CommonOptions& o, const std::string& data, const std::string& out_dir) {
    const PipelineConfig cfg = build_config(o);
    const Dataset ds = read_data(data, cfg);
    PipelineOptions opt;
    opt.dataset_name = dataset_name(data);
    const auto res = run_bootstrap(cfg, ds, opt);
    if (out_dir.empty()) {
        write_metrics(std::cout, res.metrics);
        return 0;
    }
    const fs::path dir(out_dir);
    write_file(dir / "metrics.csv", [&](std::ostream& s) { write_metrics(s, res.metrics); });
    write_file(dir / "bootstrap_ratios.csv", [&](std::ostream& s) { write_bootstrap_ratios(s, res); });
    write_file(dir / "config.json", [&](std::ostream& s) { s << canonical_config(cfg) << '\n'; });
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<MetricRow> rows;
    for (const auto& p : inputs) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw InputError("report: cannot open '" + p + "'");
        auto part = read_metrics(in);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    emit(out, [&](std::ostream& s) { write_scatter(s, rows); });
    return 0;
}

int cmd_simulate(int dim, double rho, long length, std::optional<std::uint64_t> seed, const std::string& out) {
    if (!seed) throw ConfigError("simulate: --seed is required");
    if (dim < 1 || length < 1) throw ConfigError("simulate: --dim and --length must be >= 1");
    if (!(rho > -1.0 / std::max(dim - 1, 1) && rho < 1.0))
        throw ConfigError("simulate: --rho must give a positive definite equicorrelation matrix");
    std::vector<ArmaGarchParams> margins;
    for (int j = 0; j < dim; ++j)
        margins.push_back(benchmark_margin(0.0, 0.3 - 0.05 * (j % 3), -0.2, 0.05, 0.1, 0.8, 6.0 + j % 3));
    Rng rng(*seed);
    const auto series = simulate_series(margins, GaussianCopula::equicorrelated(dim, rho), length, rng);
    std::vector<std::string> columns, times;
    for (int j = 0; j < dim; ++j) columns.push_back("s" + std::to_string(j + 1));
    for (long t = 0; t < length; ++t) times.push_back(std::to_string(t + 1));
    emit(out, [&](std::ostream& s) { write_table(s, columns, times, series.x); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GMMN-GARCH multivariate time series modeling and forecasting"};
    app.require_subcommand(1);

    std::string data, out;

    CommonOptions fit_opt;
    auto* fit = app.add_subcommand("fit", "fit margins and every configured dependence model, save model files");
    add_common(fit, fit_opt, false);
    fit->add_option("--data", data, "input CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", out, "output directory")->required();

    std::string model_path;
    std::optional<std::uint64_t> fc_seed;
    std::optional<std::string> fc_transform;
    std::optional<long> origin;
    int fc_n_pth = 1000, horizon = 1;
    auto* forecast = app.add_subcommand("forecast", "simulate predictive paths from a saved model");
    forecast->add_option("--model", model_path, "model file written by fit")->required()->check(CLI::ExistingFile);
    forecast->add_option("--data", data, "input CSV")->required()->check(CLI::ExistingFile);
    forecast->add_option("--seed", fc_seed, "master seed");
    forecast->add_option("--transform", fc_transform, "none, difference or log_returns");
    forecast->add_option("--n-pth", fc_n_pth, "number of paths");
    forecast->add_option("--horizon", horizon, "forecast horizon");
    forecast->add_option("--origin", origin, "condition on the first ORIGIN rows (default: all)");
    forecast->add_option("--out", out, "output CSV (default: stdout)");

    CommonOptions assess_opt;
    auto* assess = app.add_subcommand("assess", "fit, forecast the test period and compute all metrics");
    add_common(assess, assess_opt, false);
    assess->add_option("--data", data, "input CSV")->required()->check(CLI::ExistingFile);
    assess->add_option("--out", out, "output directory (default: metrics to stdout)");

    CommonOptions boot_opt;
    auto* boot = app.add_subcommand("bootstrap", "compare plain and bootstrap-mixture forecasts");
    add_common(boot, boot_opt, true);
    boot->add_option("--data", data, "input CSV")->required()->check(CLI::ExistingFile);
    boot->add_option("--out", out, "output directory (default: metrics to stdout)");

    std::vector<std::string> metric_files;
    auto* report = app.add_subcommand("report", "combine metrics tables into one wide table for plotting");
    report->add_option("metrics", metric_files, "metrics CSV files")->required()->check(CLI::ExistingFile);
    report->add_option("--out", out, "output CSV (default: stdout)");

    int dim = 3;
    double rho = 0.7;
    long length = 1500;
    std::optional<std::uint64_t> sim_seed;
    auto* simulate = app.add_subcommand("simulate", "write a synthetic Gaussian-copula ARMA-GARCH dataset");
    simulate->add_option("--dim", dim, "number of series");
    simulate->add_option("--rho", rho, "equicorrelation of the Gaussian copula");
    simulate->add_option("--length", length, "number of rows");
    simulate->add_option("--seed", sim_seed, "seed");
    simulate->add_option("--out", out, "output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*fit) return cmd_fit(fit_opt, data, out);
        if (*forecast) return cmd_forecast(model_path, data, fc_seed, fc_transform, fc_n_pth, horizon, origin, out);
        if (*assess) return cmd_assess(assess_opt, data, out);
        if (*boot) return cmd_bootstrap(boot_opt, data, out);
        if (*report) return cmd_report(metric_files, out);
        if (*simulate) return cmd_simulate(dim, rho, length, sim_seed, out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Json::exception& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
