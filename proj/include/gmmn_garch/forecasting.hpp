#pragma once

#include "gmmn_garch/copula.hpp"
#include "gmmn_garch/core.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/margins.hpp"
#include "gmmn_garch/pca.hpp"
#include "gmmn_garch/rng.hpp"

#include <algorithm>
#include <concepts>
#include <span>
#include <vector>

namespace gmmn_garch {

/// How U in (0,1)^{d*} is mapped back to the innovation scale.
enum class QuantileMode {
    Parametric,  ///< fitted scaled t quantiles (no dimension reduction)
    Empirical,   ///< empirical quantiles of the training Y columns
};

/// Fitted multivariate model: marginal ARMA-GARCH fits, the PCA map, the
/// dependence model, and the inverse margins of Y.
struct MtsModel {
    std::vector<MarginalFitResult> margins;
    PcaTransform pca;
    DependenceModel dependence;
    QuantileMode quantile_mode = QuantileMode::Parametric;
    std::vector<EmpiricalQuantile> quantiles;  // d* tables in Empirical mode
    int tau = 0;

    [[nodiscard]] int d() const { return static_cast<int>(margins.size()); }
    [[nodiscard]] int d_star() const { return pca.k; }

    void validate() const {
        require(!margins.empty(), "MtsModel: no margins");
        require(pca.dim() == d(), "MtsModel: PCA dimension does not match the number of margins");
        require(dependence.dim() == d_star(), "MtsModel: dependence dimension does not match d*");
        require((quantile_mode == QuantileMode::Empirical) == pca.reduced || dependence.is_mixture(),
                "MtsModel: quantile mode must be empirical exactly when PCA reduces the dimension");
        if (quantile_mode == QuantileMode::Empirical && !dependence.is_mixture())
            require(static_cast<int>(quantiles.size()) == d_star(), "MtsModel: one quantile table per component required");
    }

    [[nodiscard]] std::size_t max_lag() const {
        std::size_t m = 0;
        for (const auto& f : margins) m = std::max(m, static_cast<std::size_t>(f.params.orders().max_lag()));
        return m;
    }
};

/// n_pth x h x d simulated values conditional on history up to `origin`.
struct PredictivePaths {
    std::vector<double> values;
    std::size_t n_pth = 0;
    std::size_t h = 0;
    std::size_t d = 0;
    std::size_t origin = 0;  // number of observed rows the paths condition on

    [[nodiscard]] double at(std::size_t i, std::size_t s, std::size_t j) const { return values[(i * h + s) * d + j]; }
    double& at(std::size_t i, std::size_t s, std::size_t j) { return values[(i * h + s) * d + j]; }
};

/// Callable producing dependence draws, e.g. a DependenceModel or a known copula.
template <typename S>
concept DependenceSampler = requires(const S& s, Eigen::Index n, Rng& rng) {
    { s(n, rng) } -> std::convertible_to<DependenceDraw>;
};

/// Maps (component j, probability u, mixture component b) to Y_j.
template <typename Q>
concept InverseMargins = requires(const Q& q, Eigen::Index j, double u, std::size_t b) {
    { q(j, u, b) } -> std::convertible_to<double>;
};

/// Inverse margins of a fitted model, honoring per-component tables of a mixture.
inline auto model_inverse_margins(const MtsModel& model) {
    const auto* mix = std::get_if<BootstrapMixture>(&model.dependence.variant());
    return [&model, mix](Eigen::Index j, double u, std::size_t b) -> double {
        if (mix) return mix->component_quantiles[b][static_cast<std::size_t>(j)](u);
        if (model.quantile_mode == QuantileMode::Empirical) return model.quantiles[static_cast<std::size_t>(j)](u);
        return scaled_t_quantile(u, model.margins[static_cast<std::size_t>(j)].params.nu);
    };
}

inline auto model_sampler(const MtsModel& model) {
    return [&model](Eigen::Index n, Rng& rng) { return model.dependence.draw(n, rng); };
}

/// Core path simulation: one joint draw of U per (path, step) from a single
/// batch of n_pth * h rows, Y = F^{-1}(U), Z = upsilon Y, then the marginal
/// recursions continued from each margin's state.
template <DependenceSampler Sampler, InverseMargins Inverse>
PredictivePaths simulate_paths(const std::vector<ArmaGarchParams>& params, const std::vector<LaggedState>& states,
                               const PcaTransform& pca, const Sampler& sampler, const Inverse& inverse,
                               std::size_t n_pth, std::size_t h, std::size_t origin, Rng& rng) {
    require(n_pth >= 1 && h >= 1, "forecast: n_pth and h must be >= 1");
    require(params.size() == states.size(), "forecast: one state per margin required");
    const std::size_t d = params.size();
    const auto d_star = static_cast<Eigen::Index>(pca.k);
    const auto rows = static_cast<Eigen::Index>(n_pth * h);
    const DependenceDraw draw = sampler(rows, rng);
    require(draw.u.rows() == rows && draw.u.cols() == d_star, "forecast: dependence draw has the wrong shape");

    Matrix y(rows, d_star);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t b = draw.component.empty() ? 0 : draw.component[static_cast<std::size_t>(r)];
        for (Eigen::Index j = 0; j < d_star; ++j) y(r, j) = inverse(j, draw.u(r, j), b);
    }
    const Matrix z = lift_rows(pca, y);

    PredictivePaths out;
    out.n_pth = n_pth;
    out.h = h;
    out.d = d;
    out.origin = origin;
    out.values.resize(n_pth * h * d);
    std::vector<double> zs(h);
    for (std::size_t i = 0; i < n_pth; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t s = 0; s < h; ++s) zs[s] = z(static_cast<Eigen::Index>(i * h + s), static_cast<Eigen::Index>(j));
            const auto xs = arma_garch_simulate(params[j], zs, states[j]);
            for (std::size_t s = 0; s < h; ++s) out.at(i, s, j) = xs[s];
        }
    }
    for (double v : out.values)
        if (!std::isfinite(v)) throw NumericalError("forecast: simulated path is not finite");
    return out;
}

namespace detail {

inline std::vector<FilterOutput> filter_columns(const MtsModel& model, const Matrix& x) {
    std::vector<FilterOutput> out;
    out.reserve(model.margins.size());
    for (std::size_t j = 0; j < model.margins.size(); ++j) {
        const Eigen::VectorXd col = x.col(static_cast<Eigen::Index>(j));
        out.push_back(arma_garch_filter(model.margins[j].params, std::span<const double>(col.data(), col.size()),
                                        model.margins[j].base_variance));
    }
    return out;
}

inline std::vector<LaggedState> states_at(const MtsModel& model, const Matrix& x,
                                          const std::vector<FilterOutput>& filtered, std::size_t origin) {
    const std::size_t lags = std::max<std::size_t>(model.max_lag(), 1);
    require(origin >= lags, "forecast: history shorter than the model's lag order");
    std::vector<LaggedState> states(model.margins.size());
    for (std::size_t j = 0; j < model.margins.size(); ++j) {
        for (std::size_t t = origin - lags; t < origin; ++t) {
            states[j].x.push_back(x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)));
            states[j].mu.push_back(filtered[j].mu_t[t]);
            states[j].sigma2.push_back(filtered[j].sigma2_t[t]);
        }
    }
    return states;
}

inline std::vector<ArmaGarchParams> margin_params(const MtsModel& model) {
    std::vector<ArmaGarchParams> p;
    for (const auto& m : model.margins) p.push_back(m.params);
    return p;
}

}  // namespace detail

/// n_pth paths of length h conditional on the rows of `history` (X_1..X_t).
inline PredictivePaths forecast_paths(const MtsModel& model, const Matrix& history, std::size_t n_pth, std::size_t h,
                                      Rng& rng) {
    model.validate();
    require(history.cols() == model.d(), "forecast_paths: history has the wrong number of columns");
    if (static_cast<std::size_t>(history.rows()) < std::max<std::size_t>(model.max_lag(), 1))
        throw InputError("forecast_paths: history shorter than the model's lag order");
    const auto filtered = detail::filter_columns(model, history);
    const auto origin = static_cast<std::size_t>(history.rows());
    const auto states = detail::states_at(model, history, filtered, origin);
    return simulate_paths(detail::margin_params(model), states, model.pca, model_sampler(model),
                          model_inverse_margins(model), n_pth, h, origin, rng);
}

/// Rolling forecasts from every origin t = tau, ..., T - h without re-fitting.
/// Origin t uses the stream rng.split(t), so each forecast equals
/// forecast_paths on the first t rows with that stream.
inline std::vector<PredictivePaths> rolling_forecasts(const MtsModel& model, const Matrix& data, std::size_t tau,
                                                      std::size_t n_pth, std::size_t h, const Rng& rng) {
    model.validate();
    require(data.cols() == model.d(), "rolling_forecasts: data has the wrong number of columns");
    const auto T = static_cast<std::size_t>(data.rows());
    require(tau >= std::max<std::size_t>(model.max_lag(), 1) && tau + h <= T, "rolling_forecasts: invalid split");
    const auto filtered = detail::filter_columns(model, data);
    const auto params = detail::margin_params(model);
    const auto sampler = model_sampler(model);
    const auto inverse = model_inverse_margins(model);
    std::vector<PredictivePaths> out;
    out.reserve(T - h - tau + 1);
    for (std::size_t t = tau; t + h <= T; ++t) {
        Rng step_rng = rng.split(t);
        out.push_back(simulate_paths(params, detail::states_at(model, data, filtered, t), model.pca, sampler, inverse,
                                     n_pth, h, t, step_rng));
    }
    return out;
}

/// S^(i) = sum_j X^(i)_{s,j} for step s of every path.
inline std::vector<double> aggregate_returns(const PredictivePaths& paths, std::size_t s) {
    require(s < paths.h, "aggregate_returns: step out of range");
    std::vector<double> agg(paths.n_pth, 0.0);
    for (std::size_t i = 0; i < paths.n_pth; ++i)
        for (std::size_t j = 0; j < paths.d; ++j) agg[i] += paths.at(i, s, j);
    return agg;
}

/// Empirical alpha-quantile: the ceil(alpha * n)-th order statistic.
inline double var_forecast(std::vector<double> aggregates, double alpha) {
    require(!aggregates.empty(), "var_forecast: empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("var_forecast: alpha must lie in (0, 1)");
    const std::size_t k = lower_quantile_index(alpha, aggregates.size());
    std::nth_element(aggregates.begin(), aggregates.begin() + static_cast<std::ptrdiff_t>(k), aggregates.end());
    return aggregates[k];
}

}  // namespace gmmn_garch
