#pragma once

#include "gmmn_garch/assessment.hpp"
#include "gmmn_garch/bootstrap.hpp"
#include "gmmn_garch/config.hpp"
#include "gmmn_garch/copula.hpp"
#include "gmmn_garch/dataset.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/forecasting.hpp"
#include "gmmn_garch/margins.hpp"
#include "gmmn_garch/pca.hpp"

#include <charconv>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace gmmn_garch {

/// Runs `f`, prefixing any library error with the pipeline stage it came from.
template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
    const auto label = [&](const std::exception& e) { return "[" + stage + "] " + e.what(); };
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(label(e));
    } catch (const InputError& e) {
        throw InputError(label(e));
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(label(e));
    } catch (const NumericalError& e) {
        throw NumericalError(label(e));
    }
}

namespace stream {
// Sub-streams of the master seed.
inline constexpr std::uint64_t kDependenceFit = 10;
inline constexpr std::uint64_t kForecast = 20;
inline constexpr std::uint64_t kAssess = 30;
inline constexpr std::uint64_t kBootstrap = 40;
}  // namespace stream

/// Everything fitted on the training rows that does not depend on the
/// dependence model.
struct MarginalStage {
    std::vector<MarginalFitResult> margins;
    Matrix z_train;  // tau x d standardized residuals
    PcaTransform pca;
    Matrix y_train;  // tau x d*
    PseudoSample pseudo;
    std::vector<EmpiricalQuantile> quantiles;  // filled when PCA reduces
};

inline MarginalStage fit_marginal_stage(const PipelineConfig& cfg, const Matrix& x_train) {
    MarginalStage st;
    const FitOptions opt{cfg.orders, cfg.fix_mu_zero, cfg.init, {}};
    run_stage("margins", [&] {
        st.z_train.resize(x_train.rows(), x_train.cols());
        for (Eigen::Index j = 0; j < x_train.cols(); ++j) {
            const Eigen::VectorXd col = x_train.col(j);
            try {
                st.margins.push_back(fit_arma_garch(std::span<const double>(col.data(), col.size()), opt));
            } catch (const NumericalError& e) {
                throw NumericalError("column " + std::to_string(j + 1) + ": " + e.what());
            } catch (const InputError& e) {
                throw InputError("column " + std::to_string(j + 1) + ": " + e.what());
            }
            const auto& z = st.margins.back().filter.z_t;
            for (Eigen::Index t = 0; t < x_train.rows(); ++t) st.z_train(t, j) = z[static_cast<std::size_t>(t)];
        }
    });
    run_stage("reduction", [&] {
        const int d = static_cast<int>(x_train.cols());
        if (cfg.pca.enabled) {
            const PcaTransform full = fit_pca(st.z_train);
            st.pca = truncate(full, select_k(full.lambdas, cfg.pca.threshold, cfg.pca.k_min));
        } else {
            st.pca = PcaTransform::identity(d);
        }
        st.y_train = project_rows(st.pca, st.z_train);
        if (st.pca.reduced) st.quantiles = column_quantiles(st.y_train);
    });
    run_stage("pseudo-observations", [&] { st.pseudo = pseudo_observations(st.y_train); });
    return st;
}

inline MtsModel assemble_model(const MarginalStage& st, DependenceModel dependence, int tau) {
    MtsModel m;
    m.margins = st.margins;
    m.pca = st.pca;
    m.dependence = std::move(dependence);
    m.quantile_mode = st.pca.reduced ? QuantileMode::Empirical : QuantileMode::Parametric;
    m.quantiles = st.quantiles;
    m.tau = tau;
    m.validate();
    return m;
}

/// Test-period dependence sample: filter every row with the fitted margins,
/// keep the test rows, project, and convert to pseudo-observations.
inline Matrix test_pseudo_observations(const MtsModel& model, const Matrix& data, Eigen::Index tau) {
    require(tau >= 1 && tau < data.rows(), "test extraction: invalid training cut");
    const auto filtered = detail::filter_columns(model, data);
    const Eigen::Index m = data.rows() - tau;
    Matrix z(m, data.cols());
    for (std::size_t j = 0; j < filtered.size(); ++j)
        for (Eigen::Index t = 0; t < m; ++t)
            z(t, static_cast<Eigen::Index>(j)) = filtered[j].z_t[static_cast<std::size_t>(tau + t)];
    return pseudo_observations(project_rows(model.pca, z)).u;
}

struct MetricRow {
    std::string dataset;
    std::string model;
    std::string metric;
    double value = 0.0;
    int n_pth = 0;
    int n_rep = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// Outcome of assessing one fitted model on the test rows.
struct ModelAssessment {
    std::string label;
    MtsModel model;
    std::vector<PredictivePaths> forecasts;  // kept only on request
    std::vector<double> mse;                 // per test row
    std::vector<double> vs;
    std::vector<double> var;
    double ammd = 0.0;
    double amse = 0.0;
    double avs = 0.0;
    double vear = 0.0;
};

struct PipelineOptions {
    std::string dataset_name = "dataset";
    bool keep_forecasts = false;
};

struct PipelineResult {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> test_times;
    std::vector<ModelAssessment> models;
    std::vector<MetricRow> metrics;
};

/// h = 1 rolling forecasts for t = tau..T-1 and all four metrics.
inline ModelAssessment assess_model(std::string label, MtsModel model, const Dataset& ds, const PipelineConfig& cfg,
                                    std::uint64_t seed, bool keep_forecasts) {
    ModelAssessment a;
    a.label = std::move(label);
    const Matrix x_test = ds.test();
    const Rng master(seed);
    auto forecasts = run_stage("forecast " + a.label, [&] {
        return rolling_forecasts(model, ds.values, static_cast<std::size_t>(ds.tau),
                                 static_cast<std::size_t>(cfg.forecast.n_pth), 1, master.split(stream::kForecast));
    });
    run_stage("assess " + a.label, [&] {
        const Matrix u_test = test_pseudo_observations(model, ds.values, ds.tau);
        a.ammd = ammd(u_test, model.dependence, cfg.assess, master.split(stream::kAssess));
        a.mse = daily_mse(forecasts, x_test);
        a.vs = daily_vs(forecasts, x_test, cfg.assess.r);
        a.var = var_series(forecasts, cfg.assess.alpha);
        a.amse = mean_of(a.mse);
        a.avs = mean_of(a.vs);
        a.vear = vear(row_sums(x_test), a.var, cfg.assess.alpha);
    });
    if (keep_forecasts) a.forecasts = std::move(forecasts);
    a.model = std::move(model);
    return a;
}

inline std::string avs_metric_name(double r) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, r);
    return "avs_" + std::string(buf, res.ptr);
}

inline void append_metrics(std::vector<MetricRow>& rows, const ModelAssessment& a, const std::string& dataset,
                           const PipelineConfig& cfg, std::uint64_t seed, const std::string& hash) {
    const auto row = [&](std::string metric, double v) {
        rows.push_back({dataset, a.label, std::move(metric), v, cfg.forecast.n_pth, cfg.assess.n_rep, seed, hash});
    };
    row("ammd", a.ammd);
    row("amse", a.amse);
    row(avs_metric_name(cfg.assess.r), a.avs);
    row("vear", a.vear);
}

/// Fits the margins once, then fits, forecasts and assesses every configured
/// dependence model.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset& ds, const PipelineOptions& opt = {}) {
    cfg.validate();
    PipelineResult res;
    res.seed = cfg.require_seed();
    res.config_hash = config_hash(cfg);
    res.test_times.assign(ds.times.begin() + ds.tau, ds.times.end());
    const Rng master(res.seed);
    const MarginalStage st = fit_marginal_stage(cfg, ds.train());
    for (std::size_t i = 0; i < cfg.dependence.size(); ++i) {
        const auto& spec = cfg.dependence[i];
        DependenceModel dep = run_stage("dependence " + spec.label(), [&] {
            return fit_dependence(spec, st.pseudo, master.split(stream::kDependenceFit).split(i).seed());
        });
        MtsModel model = assemble_model(st, std::move(dep), static_cast<int>(ds.tau));
        res.models.push_back(assess_model(spec.label(), std::move(model), ds, cfg, res.seed, opt.keep_forecasts));
        append_metrics(res.metrics, res.models.back(), opt.dataset_name, cfg, res.seed, res.config_hash);
    }
    return res;
}

/// One fitted MtsModel per configured dependence model, without assessment.
inline std::vector<std::pair<std::string, MtsModel>> fit_models(const PipelineConfig& cfg, const Dataset& ds) {
    cfg.validate();
    const Rng master(cfg.require_seed());
    const MarginalStage st = fit_marginal_stage(cfg, ds.train());
    std::vector<std::pair<std::string, MtsModel>> out;
    for (std::size_t i = 0; i < cfg.dependence.size(); ++i) {
        const auto& spec = cfg.dependence[i];
        DependenceModel dep = run_stage("dependence " + spec.label(), [&] {
            return fit_dependence(spec, st.pseudo, master.split(stream::kDependenceFit).split(i).seed());
        });
        out.emplace_back(spec.label(), assemble_model(st, std::move(dep), static_cast<int>(ds.tau)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bootstrap comparison

struct BootstrapComparison {
    std::string label;
    ModelAssessment plain;
    ModelAssessment mixture;
    std::vector<double> mse_ratio;  // mixture / plain, per test row
    std::vector<double> vs_ratio;
};

struct BootstrapResult {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> test_times;
    std::vector<BootstrapComparison> models;
    std::vector<MetricRow> metrics;
};

/// For every dependence family, plain forecasts versus forecasts from an
/// n_bt-component bootstrap mixture. Both share the forecast stream.
inline BootstrapResult run_bootstrap(const PipelineConfig& cfg, const Dataset& ds, const PipelineOptions& opt = {}) {
    cfg.validate();
    BootstrapResult res;
    res.seed = cfg.require_seed();
    res.config_hash = config_hash(cfg);
    res.test_times.assign(ds.times.begin() + ds.tau, ds.times.end());
    const Rng master(res.seed);
    const MarginalStage st = fit_marginal_stage(cfg, ds.train());
    for (std::size_t i = 0; i < cfg.dependence.size(); ++i) {
        const auto& spec = cfg.dependence[i];
        BootstrapComparison c;
        c.label = spec.label();
        DependenceModel dep = run_stage("dependence " + c.label, [&] {
            return fit_dependence(spec, st.pseudo, master.split(stream::kDependenceFit).split(i).seed());
        });
        c.plain = assess_model(c.label, assemble_model(st, std::move(dep), static_cast<int>(ds.tau)), ds, cfg, res.seed,
                               opt.keep_forecasts);
        DependenceModel mix = run_stage("bootstrap " + c.label, [&] {
            Rng boot_rng = master.split(stream::kBootstrap).split(i);
            return DependenceModel(
                bootstrap_fit(st.y_train, static_cast<std::size_t>(cfg.n_bt), make_fitter(spec), boot_rng));
        });
        c.mixture = assess_model(c.label + "_bootstrap", assemble_model(st, std::move(mix), static_cast<int>(ds.tau)),
                                 ds, cfg, res.seed, opt.keep_forecasts);
        for (std::size_t t = 0; t < c.plain.mse.size(); ++t) {
            c.mse_ratio.push_back(c.mixture.mse[t] / c.plain.mse[t]);
            c.vs_ratio.push_back(c.mixture.vs[t] / c.plain.vs[t]);
        }
        append_metrics(res.metrics, c.plain, opt.dataset_name, cfg, res.seed, res.config_hash);
        append_metrics(res.metrics, c.mixture, opt.dataset_name, cfg, res.seed, res.config_hash);
        res.models.push_back(std::move(c));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Output tables

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace detail

inline void write_metrics(std::ostream& out, const std::vector<MetricRow>& rows) {
    out << "dataset,model,metric,value,n_pth,n_rep,seed,config_hash\n";
    for (const auto& r : rows)
        out << detail::csv_field(r.dataset) << ',' << detail::csv_field(r.model) << ',' << r.metric << ','
            << detail::format_double(r.value) << ',' << r.n_pth << ',' << r.n_rep << ',' << r.seed << ','
            << r.config_hash << '\n';
}

inline std::vector<MetricRow> read_metrics(std::istream& in) {
    std::vector<std::string> fields;
    std::size_t line = 1;
    if (!detail::read_csv_record(in, fields, line)) throw InputError("metrics: empty input");
    const std::vector<std::string> header{"dataset", "model", "metric", "value", "n_pth", "n_rep", "seed", "config_hash"};
    if (fields != header) throw InputError("metrics: unexpected header");
    std::vector<MetricRow> rows;
    std::size_t row = 0;
    while (detail::read_csv_record(in, fields, line)) {
        ++row;
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != header.size()) throw DatasetError("metrics: wrong number of cells", row, fields.size());
        MetricRow r;
        r.dataset = fields[0];
        r.model = fields[1];
        r.metric = fields[2];
        if (!detail::parse_double(fields[3], r.value)) throw DatasetError("metrics: non-numeric value", row, 4);
        try {
            r.n_pth = std::stoi(fields[4]);
            r.n_rep = std::stoi(fields[5]);
            r.seed = std::stoull(fields[6]);
        } catch (const std::exception&) {
            throw DatasetError("metrics: non-numeric count", row, 5);
        }
        r.config_hash = fields[7];
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Wide table for scatter plots: one row per (dataset, model), metrics as columns.
inline void write_scatter(std::ostream& out, const std::vector<MetricRow>& rows) {
    std::vector<std::string> metrics;
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;
    for (const auto& r : rows) {
        if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
        const auto key = std::make_pair(r.dataset, r.model);
        if (!cells.count(key)) keys.push_back(key);
        cells[key][r.metric] = r.value;
    }
    out << "dataset,model";
    for (const auto& m : metrics) out << ',' << m;
    out << '\n';
    for (const auto& key : keys) {
        out << detail::csv_field(key.first) << ',' << detail::csv_field(key.second);
        for (const auto& m : metrics) {
            out << ',';
            const auto it = cells[key].find(m);
            if (it != cells[key].end()) out << detail::format_double(it->second);
        }
        out << '\n';
    }
}

/// Per-row MSE and VS of bootstrap-mixture versus plain forecasts.
inline void write_bootstrap_ratios(std::ostream& out, const BootstrapResult& res) {
    out << "model,time,mse_plain,mse_bootstrap,mse_ratio,vs_plain,vs_bootstrap,vs_ratio\n";
    for (const auto& c : res.models) {
        for (std::size_t t = 0; t < c.mse_ratio.size(); ++t) {
            out << detail::csv_field(c.label) << ',' << detail::csv_field(res.test_times[t]) << ','
                << detail::format_double(c.plain.mse[t]) << ',' << detail::format_double(c.mixture.mse[t]) << ','
                << detail::format_double(c.mse_ratio[t]) << ',' << detail::format_double(c.plain.vs[t]) << ','
                << detail::format_double(c.mixture.vs[t]) << ',' << detail::format_double(c.vs_ratio[t]) << '\n';
        }
    }
}

/// Per-row MSE, VS, VaR forecast and realized aggregate for every model.
inline void write_daily(std::ostream& out, const PipelineResult& res, const Matrix& x_test) {
    out << "model,time,mse,vs,var,aggregate\n";
    const auto s = row_sums(x_test);
    for (const auto& a : res.models) {
        for (std::size_t t = 0; t < a.mse.size(); ++t) {
            out << detail::csv_field(a.label) << ',' << detail::csv_field(res.test_times[t]) << ','
                << detail::format_double(a.mse[t]) << ',' << detail::format_double(a.vs[t]) << ','
                << detail::format_double(a.var[t]) << ',' << detail::format_double(s[t]) << '\n';
        }
    }
}

/// One record per (t, i, s, j).
inline void write_paths(std::ostream& out, const PredictivePaths& p, const std::vector<std::string>& columns) {
    out << "origin,path,step,series,value\n";
    for (std::size_t i = 0; i < p.n_pth; ++i)
        for (std::size_t s = 0; s < p.h; ++s)
            for (std::size_t j = 0; j < p.d; ++j)
                out << p.origin << ',' << i << ',' << s + 1 << ','
                    << detail::csv_field(j < columns.size() ? columns[j] : std::to_string(j + 1)) << ','
                    << detail::format_double(p.at(i, s, j)) << '\n';
}

}  // namespace gmmn_garch
