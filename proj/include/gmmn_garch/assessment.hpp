#pragma once

#include "gmmn_garch/core.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/forecasting.hpp"
#include "gmmn_garch/mmd.hpp"
#include "gmmn_garch/rng.hpp"

#include <cmath>
#include <vector>

namespace gmmn_garch {

struct AssessConfig {
    int n_rep = 100;
    KernelSpec kernel = KernelSpec::assessment_default();
    double r = 0.25;       // variogram order
    double alpha = 0.05;   // VaR level
    int n_pth = 1000;

    void validate() const {
        if (n_rep < 1) throw ConfigError("AssessConfig: n_rep must be >= 1");
        if (!(r > 0.0)) throw ConfigError("AssessConfig: variogram order must be > 0");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("AssessConfig: alpha must lie in (0, 1)");
        if (n_pth < 1) throw ConfigError("AssessConfig: n_pth must be >= 1");
        kernel.validate();
    }
};

/// Average MMD between the test pseudo-observations and n_rep independent
/// samples of the same size; replicate i uses rng.split(i).
template <DependenceSampler Sampler>
double ammd(const Matrix& u_test, const Sampler& sampler, int n_rep, const KernelSpec& kernel, const Rng& rng) {
    require(u_test.rows() >= 1, "ammd: empty test sample");
    if (n_rep < 1) throw ConfigError("ammd: n_rep must be >= 1");
    const detail::KernelTable table(kernel);
    const auto test_sum = detail::kernel_sum(u_test, u_test, table);
    const double m = static_cast<double>(u_test.rows());
    double total = 0.0;
    for (int i = 0; i < n_rep; ++i) {
        Rng sub = rng.split(static_cast<std::uint64_t>(i));
        const Matrix u = sampler(u_test.rows(), sub).u;
        require(u.cols() == u_test.cols(), "ammd: sampler dimension mismatch");
        const auto cross = detail::kernel_sum(u_test, u, table);
        const auto self = detail::kernel_sum(u, u, table);
        const double m2 = detail::mmd2_from_sums(test_sum, cross, self, m, static_cast<double>(u.rows()));
        total += std::sqrt(std::max(m2, 0.0));
    }
    return total / n_rep;
}

inline double ammd(const Matrix& u_test, const DependenceModel& model, const AssessConfig& cfg, const Rng& rng) {
    return ammd(
        u_test, [&model](Eigen::Index n, Rng& r) { return model.draw(n, r); }, cfg.n_rep, cfg.kernel, rng);
}

namespace detail {

inline void check_alignment(const std::vector<PredictivePaths>& forecasts, const Matrix& x_test) {
    require(!forecasts.empty(), "assessment: no forecasts");
    require(static_cast<std::size_t>(x_test.rows()) == forecasts.size(), "assessment: one forecast per test row required");
    for (const auto& f : forecasts)
        require(f.d == static_cast<std::size_t>(x_test.cols()) && f.h >= 1 && f.n_pth >= 1,
                "assessment: forecast shape does not match the test data");
}

}  // namespace detail

/// MSE(t) = mean over paths of |X_hat^(i)_t - X_t|^2, one per test row.
inline std::vector<double> daily_mse(const std::vector<PredictivePaths>& forecasts, const Matrix& x_test) {
    detail::check_alignment(forecasts, x_test);
    std::vector<double> out(forecasts.size());
    for (std::size_t t = 0; t < forecasts.size(); ++t) {
        const auto& f = forecasts[t];
        double sum = 0.0;
        for (std::size_t i = 0; i < f.n_pth; ++i) {
            for (std::size_t j = 0; j < f.d; ++j) {
                const double e = f.at(i, 0, j) - x_test(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j));
                sum += e * e;
            }
        }
        out[t] = sum / static_cast<double>(f.n_pth);
    }
    return out;
}

/// VS^r(t) = sum_{j1, j2} (|X_j1 - X_j2|^r - mean_i |X_hat_j1 - X_hat_j2|^r)^2.
inline std::vector<double> daily_vs(const std::vector<PredictivePaths>& forecasts, const Matrix& x_test, double r) {
    detail::check_alignment(forecasts, x_test);
    if (!(r > 0.0)) throw InputError("variogram score: order must be > 0");
    std::vector<double> out(forecasts.size());
    for (std::size_t t = 0; t < forecasts.size(); ++t) {
        const auto& f = forecasts[t];
        const auto row = static_cast<Eigen::Index>(t);
        double score = 0.0;
        for (std::size_t j1 = 0; j1 < f.d; ++j1) {
            // Diagonal terms vanish and (j1, j2) equals (j2, j1).
            for (std::size_t j2 = j1 + 1; j2 < f.d; ++j2) {
                const double observed = std::pow(
                    std::abs(x_test(row, static_cast<Eigen::Index>(j1)) - x_test(row, static_cast<Eigen::Index>(j2))), r);
                double expected = 0.0;
                for (std::size_t i = 0; i < f.n_pth; ++i) expected += std::pow(std::abs(f.at(i, 0, j1) - f.at(i, 0, j2)), r);
                expected /= static_cast<double>(f.n_pth);
                score += 2.0 * (observed - expected) * (observed - expected);
            }
        }
        out[t] = score;
    }
    return out;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double amse(const std::vector<PredictivePaths>& forecasts, const Matrix& x_test) {
    return mean_of(daily_mse(forecasts, x_test));
}

inline double avs(const std::vector<PredictivePaths>& forecasts, const Matrix& x_test, double r) {
    return mean_of(daily_vs(forecasts, x_test, r));
}

/// |alpha - fraction of t with S_t < VaR_t|.
inline double vear(const std::vector<double>& s_actual, const std::vector<double>& var_forecasts, double alpha) {
    require(!s_actual.empty() && s_actual.size() == var_forecasts.size(), "vear: series must be non-empty and aligned");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("vear: alpha must lie in (0, 1)");
    std::size_t hits = 0;
    for (std::size_t t = 0; t < s_actual.size(); ++t)
        if (s_actual[t] < var_forecasts[t]) ++hits;
    return std::abs(alpha - static_cast<double>(hits) / static_cast<double>(s_actual.size()));
}

/// One-step VaR forecasts from a sequence of predictive paths.
inline std::vector<double> var_series(const std::vector<PredictivePaths>& forecasts, double alpha) {
    std::vector<double> out;
    out.reserve(forecasts.size());
    for (const auto& f : forecasts) out.push_back(var_forecast(aggregate_returns(f, 0), alpha));
    return out;
}

inline std::vector<double> row_sums(const Matrix& x) {
    std::vector<double> s(static_cast<std::size_t>(x.rows()), 0.0);
    for (Eigen::Index t = 0; t < x.rows(); ++t)
        for (Eigen::Index j = 0; j < x.cols(); ++j) s[static_cast<std::size_t>(t)] += x(t, j);
    return s;
}

}  // namespace gmmn_garch
