#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile by bisection on the CDF.
inline double normal_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Kolmogorov distribution tail P(K > lambda).
inline double kolmogorov_tail(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS statistic of `sample` against a continuous CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic p-value with Stephens' small-sample correction.
inline double ks_pvalue(const std::vector<double>& sample, const std::function<double(double)>& cdf) {
    const double n = static_cast<double>(sample.size());
    const double d = ks_statistic(sample, cdf);
    const double rn = std::sqrt(n);
    return kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d);
}

inline double ks_uniform_pvalue(const std::vector<double>& sample) {
    return ks_pvalue(sample, [](double x) { return std::clamp(x, 0.0, 1.0); });
}

/// Kendall's tau-a by direct pair counting.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    long long concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = (x[i] - x[j]) * (y[i] - y[j]);
            if (s > 0) ++concordant;
            else if (s < 0) ++discordant;
        }
    }
    return static_cast<double>(concordant - discordant) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Mixture Gaussian kernel, written directly from its definition.
inline long double kernel(const std::vector<double>& u, const std::vector<double>& v, const std::vector<double>& bw) {
    long double d2 = 0.0L;
    for (std::size_t j = 0; j < u.size(); ++j) d2 += static_cast<long double>(u[j] - v[j]) * (u[j] - v[j]);
    long double k = 0.0L;
    for (double s : bw) k += std::exp(-d2 / (2.0L * s * s));
    return k;
}

/// Biased MMD from the three double sums, in extended precision.
inline double mmd(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                  const std::vector<double>& bw) {
    long double aa = 0.0L, bb = 0.0L, ab = 0.0L;
    for (const auto& x : a)
        for (const auto& y : a) aa += kernel(x, y, bw);
    for (const auto& x : b)
        for (const auto& y : b) bb += kernel(x, y, bw);
    for (const auto& x : a)
        for (const auto& y : b) ab += kernel(x, y, bw);
    const long double na = a.size(), nb = b.size();
    const long double m2 = aa / (na * na) + bb / (nb * nb) - 2.0L * ab / (na * nb);
    return static_cast<double>(std::sqrt(std::max(m2, 0.0L)));
}

/// Scaled t CDF via numerical integration of the t density (Simpson's rule).
inline double t_density(double x, double nu) {
    return std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) / std::sqrt(nu * std::numbers::pi) *
           std::pow(1.0 + x * x / nu, -0.5 * (nu + 1.0));
}

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace oracle
