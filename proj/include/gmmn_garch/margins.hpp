#pragma once

#include "gmmn_garch/core.hpp"
#include "gmmn_garch/optimize.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace gmmn_garch {

// ---------------------------------------------------------------------------
// Scaled t innovations: unit variance Student t, F(z) = t_nu(z * sqrt(nu / (nu - 2))).

namespace scaled_t {

inline double scale(double nu) { return std::sqrt(nu / (nu - 2.0)); }

inline void check_dof(double nu) {
    if (!(nu > 2.0) || !std::isfinite(nu)) throw InputError("scaled t: degrees of freedom must be finite and > 2");
}

inline double log_density(double z, double nu) {
    const double s = scale(nu);
    const double x = z * s;
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
           0.5 * (nu + 1.0) * std::log1p(x * x / nu) + std::log(s);
}

inline double density(double z, double nu) { return std::exp(log_density(z, nu)); }

inline double cdf(double z, double nu) {
    check_dof(nu);
    return boost::math::cdf(boost::math::students_t_distribution<double>(nu), z * scale(nu));
}

}  // namespace scaled_t

/// Quantile of the unit-variance scaled t distribution.
inline double scaled_t_quantile(double p, double nu) {
    scaled_t::check_dof(nu);
    if (!(p > 0.0 && p < 1.0)) throw InputError("scaled_t_quantile: probability must lie in (0, 1)");
    return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p) / scaled_t::scale(nu);
}

// ---------------------------------------------------------------------------

struct ArmaGarchOrders {
    int p1 = 1;  // AR
    int q1 = 1;  // MA
    int p2 = 1;  // ARCH
    int q2 = 1;  // GARCH

    [[nodiscard]] int max_lag() const { return std::max({p1, q1, p2, q2}); }
    bool operator==(const ArmaGarchOrders&) const = default;
};

struct ArmaGarchParams {
    double mu = 0.0;
    std::vector<double> phi;
    std::vector<double> gamma;
    double omega = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;
    double nu = 8.0;

    [[nodiscard]] ArmaGarchOrders orders() const {
        return {static_cast<int>(phi.size()), static_cast<int>(gamma.size()), static_cast<int>(alpha.size()),
                static_cast<int>(beta.size())};
    }

    [[nodiscard]] double persistence() const {
        return std::accumulate(alpha.begin(), alpha.end(), 0.0) + std::accumulate(beta.begin(), beta.end(), 0.0);
    }

    [[nodiscard]] double unconditional_variance() const { return omega / (1.0 - persistence()); }

    /// Throws InputError naming the first violated constraint.
    void validate() const {
        if (!(omega > 0.0)) throw InputError("ArmaGarchParams: omega must be > 0");
        for (double a : alpha)
            if (!(a >= 0.0)) throw InputError("ArmaGarchParams: alpha coefficients must be >= 0");
        for (double b : beta)
            if (!(b >= 0.0)) throw InputError("ArmaGarchParams: beta coefficients must be >= 0");
        if (!(nu > 2.0)) throw InputError("ArmaGarchParams: nu must be > 2");
        if (!(persistence() < 1.0)) throw InputError("ArmaGarchParams: sum(alpha) + sum(beta) must be < 1");
        if (phi.size() == 1 && !(std::abs(phi[0]) < 1.0))
            throw InputError("ArmaGarchParams: |phi| must be < 1");
    }
};

/// How the recursions treat the time points before the first observation.
///
/// In both cases pre-sample mean-equation deviations and residuals are 0 and
/// pre-sample squared residuals and variances equal a base variance, which
/// makes the first conditional variance equal that base exactly.
enum class InitPolicy {
    Unconditional,   ///< base = omega / (1 - sum(alpha) - sum(beta))
    SampleVariance,  ///< base = sample variance of x; unconditional if that is not positive
};

struct FilterOutput {
    std::vector<double> mu_t;
    std::vector<double> sigma2_t;
    std::vector<double> z_t;
};

namespace detail {

inline double sample_variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size() - 1);
}

inline double presample_variance(const ArmaGarchParams& p, std::span<const double> x, InitPolicy init) {
    if (init == InitPolicy::SampleVariance) {
        const double v = sample_variance(x);
        if (v > 0.0 && std::isfinite(v)) return v;
    }
    return p.unconditional_variance();
}

/// Filter without validation or finiteness checks; used inside the likelihood.
inline void filter_unchecked(const ArmaGarchParams& p, std::span<const double> x, double base, FilterOutput& out) {
    const std::size_t n = x.size();
    out.mu_t.resize(n);
    out.sigma2_t.resize(n);
    out.z_t.resize(n);
    const auto lagged = [&](std::size_t t, std::size_t k) { return t >= k; };
    for (std::size_t t = 0; t < n; ++t) {
        double m = p.mu;
        for (std::size_t k = 1; k <= p.phi.size(); ++k)
            if (lagged(t, k)) m += p.phi[k - 1] * (x[t - k] - p.mu);
        for (std::size_t l = 1; l <= p.gamma.size(); ++l)
            if (lagged(t, l)) m += p.gamma[l - 1] * (x[t - l] - out.mu_t[t - l]);

        double s2 = p.omega;
        for (std::size_t k = 1; k <= p.alpha.size(); ++k) {
            if (lagged(t, k)) {
                const double e = x[t - k] - out.mu_t[t - k];
                s2 += p.alpha[k - 1] * e * e;
            } else {
                s2 += p.alpha[k - 1] * base;
            }
        }
        for (std::size_t l = 1; l <= p.beta.size(); ++l)
            s2 += p.beta[l - 1] * (lagged(t, l) ? out.sigma2_t[t - l] : base);

        out.mu_t[t] = m;
        out.sigma2_t[t] = s2;
        out.z_t[t] = (x[t] - m) / std::sqrt(s2);
    }
}

}  // namespace detail

/// Conditional means, variances and standardized residuals of x under p.
inline FilterOutput arma_garch_filter(const ArmaGarchParams& p, std::span<const double> x,
                                      InitPolicy init = InitPolicy::Unconditional) {
    p.validate();
    require(!x.empty(), "arma_garch_filter: empty series");
    for (std::size_t t = 0; t < x.size(); ++t)
        if (!std::isfinite(x[t])) throw InputError("arma_garch_filter: non-finite value at index " + std::to_string(t));
    FilterOutput out;
    detail::filter_unchecked(p, x, detail::presample_variance(p, x, init), out);
    return out;
}

/// Base variance the recursions use before the first observation of x.
inline double presample_variance(const ArmaGarchParams& p, std::span<const double> x, InitPolicy init) {
    return detail::presample_variance(p, x, init);
}

/// Filter with an explicit pre-sample base variance. Extending a training
/// series with later data and filtering with the training base reproduces
/// the training-period output exactly.
inline FilterOutput arma_garch_filter(const ArmaGarchParams& p, std::span<const double> x, double base_variance) {
    p.validate();
    require(!x.empty(), "arma_garch_filter: empty series");
    require(base_variance > 0.0 && std::isfinite(base_variance), "arma_garch_filter: base variance must be > 0");
    for (std::size_t t = 0; t < x.size(); ++t)
        if (!std::isfinite(x[t])) throw InputError("arma_garch_filter: non-finite value at index " + std::to_string(t));
    FilterOutput out;
    detail::filter_unchecked(p, x, base_variance, out);
    return out;
}

/// The most recent lags of X, mu_t and sigma2_t, oldest first.
struct LaggedState {
    std::vector<double> x;
    std::vector<double> mu;
    std::vector<double> sigma2;

    /// State at the end of a filtered history (the last `lags` points).
    static LaggedState from_history(std::span<const double> x, const FilterOutput& f, std::size_t lags) {
        require(x.size() == f.mu_t.size() && x.size() == f.sigma2_t.size(), "LaggedState: history/filter length mismatch");
        require(x.size() >= lags, "LaggedState: history shorter than the model's lag order");
        LaggedState s;
        const auto first = static_cast<std::ptrdiff_t>(x.size() - lags);
        s.x.assign(x.begin() + first, x.end());
        s.mu.assign(f.mu_t.begin() + first, f.mu_t.end());
        s.sigma2.assign(f.sigma2_t.begin() + first, f.sigma2_t.end());
        return s;
    }
};

namespace detail {

/// One step of the forward recursion given the lag buffers (oldest first,
/// newest at back). Returns (mu_s, sigma2_s).
inline std::pair<double, double> forward_moments(const ArmaGarchParams& p, const double* xs, const double* mus,
                                                 const double* s2s, std::size_t len) {
    double m = p.mu;
    for (std::size_t k = 1; k <= p.phi.size(); ++k) m += p.phi[k - 1] * (xs[len - k] - p.mu);
    for (std::size_t l = 1; l <= p.gamma.size(); ++l) m += p.gamma[l - 1] * (xs[len - l] - mus[len - l]);
    double s2 = p.omega;
    for (std::size_t k = 1; k <= p.alpha.size(); ++k) {
        const double e = xs[len - k] - mus[len - k];
        s2 += p.alpha[k - 1] * e * e;
    }
    for (std::size_t l = 1; l <= p.beta.size(); ++l) s2 += p.beta[l - 1] * s2s[len - l];
    return {m, s2};
}

}  // namespace detail

/// X_s = mu_s + sigma_s * z_s for s = 1..h, continuing the recursions from `state`.
inline std::vector<double> arma_garch_simulate(const ArmaGarchParams& p, std::span<const double> z,
                                               const LaggedState& state) {
    p.validate();
    const auto lags = static_cast<std::size_t>(p.orders().max_lag());
    if (state.x.size() < lags || state.mu.size() < lags || state.sigma2.size() < lags)
        throw InputError("arma_garch_simulate: state is missing lags required by the model orders");
    const std::size_t h = z.size();
    std::vector<double> xs(state.x.end() - static_cast<std::ptrdiff_t>(lags), state.x.end());
    std::vector<double> mus(state.mu.end() - static_cast<std::ptrdiff_t>(lags), state.mu.end());
    std::vector<double> s2s(state.sigma2.end() - static_cast<std::ptrdiff_t>(lags), state.sigma2.end());
    xs.reserve(lags + h);
    mus.reserve(lags + h);
    s2s.reserve(lags + h);
    std::vector<double> out(h);
    for (std::size_t s = 0; s < h; ++s) {
        const auto [m, s2] = detail::forward_moments(p, xs.data(), mus.data(), s2s.data(), xs.size());
        const double value = m + std::sqrt(s2) * z[s];
        xs.push_back(value);
        mus.push_back(m);
        s2s.push_back(s2);
        out[s] = value;
    }
    return out;
}

/// Scaled-t log-likelihood of x; -inf when parameters produce invalid variances.
inline double arma_garch_loglik(const ArmaGarchParams& p, std::span<const double> x,
                                InitPolicy init = InitPolicy::Unconditional) {
    FilterOutput f;
    detail::filter_unchecked(p, x, detail::presample_variance(p, x, init), f);
    const double s = scaled_t::scale(p.nu);
    const double c = std::lgamma(0.5 * (p.nu + 1.0)) - std::lgamma(0.5 * p.nu) -
                     0.5 * std::log(p.nu * std::numbers::pi) + std::log(s);
    double ll = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double s2 = f.sigma2_t[t];
        if (!(s2 > 0.0) || !std::isfinite(s2)) return -std::numeric_limits<double>::infinity();
        const double q = f.z_t[t] * s;
        ll += c - 0.5 * (p.nu + 1.0) * std::log1p(q * q / p.nu) - 0.5 * std::log(s2);
    }
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------

struct FitOptions {
    ArmaGarchOrders orders{};
    bool fix_mu_zero = false;
    InitPolicy init = InitPolicy::Unconditional;
    MinimizeOptions minimizer{};
};

struct MarginalFitResult {
    ArmaGarchParams params;
    FilterOutput filter;
    double loglik = 0.0;
    bool converged = false;
    double base_variance = 0.0;  // pre-sample variance used by `filter`
};

namespace detail {

/// Unconstrained coordinates for the likelihood search. Every point maps to
/// a feasible parameter set: tanh keeps |phi|, |gamma| < 1, a softmax with a
/// slack cell keeps (alpha, beta) on the open simplex, omega = exp(.), and
/// nu = 2 + exp(.).
struct ParamTransform {
    ArmaGarchOrders orders;
    bool fix_mu_zero;

    [[nodiscard]] Eigen::Index size() const {
        return (fix_mu_zero ? 0 : 1) + orders.p1 + orders.q1 + 1 + orders.p2 + orders.q2 + 1;
    }

    [[nodiscard]] ArmaGarchParams to_params(const Vector& v) const {
        ArmaGarchParams p;
        Eigen::Index i = 0;
        p.mu = fix_mu_zero ? 0.0 : v[i++];
        for (int k = 0; k < orders.p1; ++k) p.phi.push_back(std::tanh(v[i++]));
        for (int k = 0; k < orders.q1; ++k) p.gamma.push_back(std::tanh(v[i++]));
        p.omega = std::exp(v[i++]);
        const int m = orders.p2 + orders.q2;
        std::vector<double> w(static_cast<std::size_t>(m));
        double top = 0.0;  // slack logit
        for (int k = 0; k < m; ++k) top = std::max(top, v[i + k]);
        double denom = std::exp(-top);
        for (int k = 0; k < m; ++k) {
            w[static_cast<std::size_t>(k)] = std::exp(v[i + k] - top);
            denom += w[static_cast<std::size_t>(k)];
        }
        for (int k = 0; k < orders.p2; ++k) p.alpha.push_back(w[static_cast<std::size_t>(k)] / denom);
        for (int k = 0; k < orders.q2; ++k) p.beta.push_back(w[static_cast<std::size_t>(orders.p2 + k)] / denom);
        i += m;
        p.nu = 2.0 + std::exp(std::clamp(v[i], -7.0, 7.0));
        return p;
    }

    [[nodiscard]] Vector from_params(const ArmaGarchParams& p) const {
        Vector v(size());
        Eigen::Index i = 0;
        if (!fix_mu_zero) v[i++] = p.mu;
        for (double a : p.phi) v[i++] = std::atanh(std::clamp(a, -0.999, 0.999));
        for (double g : p.gamma) v[i++] = std::atanh(std::clamp(g, -0.999, 0.999));
        v[i++] = std::log(p.omega);
        const double slack = 1.0 - p.persistence();
        for (double a : p.alpha) v[i++] = std::log(std::max(a, 1e-8) / slack);
        for (double b : p.beta) v[i++] = std::log(std::max(b, 1e-8) / slack);
        v[i] = std::log(p.nu - 2.0);
        return v;
    }
};

inline ArmaGarchParams start_params(const ArmaGarchOrders& o, double mean, double var, double a_sum, double b_sum,
                                    double nu, double phi0) {
    ArmaGarchParams p;
    p.mu = mean;
    if (o.p1 > 0) {
        p.phi.assign(static_cast<std::size_t>(o.p1), 0.0);
        p.phi[0] = phi0;
    }
    p.gamma.assign(static_cast<std::size_t>(o.q1), 0.0);
    p.alpha.assign(static_cast<std::size_t>(o.p2), o.p2 > 0 ? a_sum / o.p2 : 0.0);
    p.beta.assign(static_cast<std::size_t>(o.q2), o.q2 > 0 ? b_sum / o.q2 : 0.0);
    p.omega = var * (1.0 - p.persistence());
    p.nu = nu;
    return p;
}

}  // namespace detail

/// Maximum-likelihood ARMA-GARCH fit with scaled t innovations.
///
/// Three deterministic starting points; the best local optimum wins.
inline MarginalFitResult fit_arma_garch(std::span<const double> x, const FitOptions& opt = {}) {
    if (x.size() < 50) throw InputError("fit_arma_garch: at least 50 observations are required");
    for (std::size_t t = 0; t < x.size(); ++t)
        if (!std::isfinite(x[t])) throw InputError("fit_arma_garch: non-finite value at index " + std::to_string(t));
    const double var = detail::sample_variance(x);
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (!(var > 0.0) || *lo == *hi) throw DegenerateInputError("fit_arma_garch: series has zero sample variance");
    const double mean = opt.fix_mu_zero ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());

    const detail::ParamTransform transform{opt.orders, opt.fix_mu_zero};
    const double n = static_cast<double>(x.size());
    const auto objective = [&](const Vector& v) {
        const double ll = arma_garch_loglik(transform.to_params(v), x, opt.init);
        return std::isfinite(ll) ? -ll / n : std::numeric_limits<double>::infinity();
    };

    const std::array starts{
        detail::start_params(opt.orders, mean, var, 0.05, 0.90, 8.0, 0.0),
        detail::start_params(opt.orders, mean, var, 0.10, 0.80, 5.0, 0.3),
        detail::start_params(opt.orders, mean, var, 0.20, 0.60, 15.0, -0.3),
    };

    MinimizeResult best;
    for (const auto& start : starts) {
        MinimizeResult r = minimize_bfgs(objective, transform.from_params(start), opt.minimizer);
        if (std::isfinite(r.value) && (!std::isfinite(best.value) || r.value < best.value)) best = std::move(r);
    }
    if (!std::isfinite(best.value)) throw NumericalError("fit_arma_garch: likelihood is not finite at any start");

    MarginalFitResult res;
    res.params = transform.to_params(best.x);
    res.base_variance = presample_variance(res.params, x, opt.init);
    res.filter = arma_garch_filter(res.params, x, res.base_variance);
    res.loglik = arma_garch_loglik(res.params, x, opt.init);
    res.converged = best.converged;
    return res;
}

}  // namespace gmmn_garch
