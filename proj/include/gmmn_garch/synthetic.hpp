#pragma once

#include "gmmn_garch/core.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/margins.hpp"
#include "gmmn_garch/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <vector>

namespace gmmn_garch {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Gaussian copula with a given correlation matrix. Serves as a known
/// data-generating dependence structure; it is not fitted to data.
class GaussianCopula {
public:
    explicit GaussianCopula(const Eigen::MatrixXd& correlation) {
        require(correlation.rows() == correlation.cols() && correlation.rows() >= 1,
                "GaussianCopula: correlation must be square");
        Eigen::LLT<Eigen::MatrixXd> llt(correlation);
        if (llt.info() != Eigen::Success) throw InputError("GaussianCopula: correlation is not positive definite");
        chol_ = llt.matrixL();
    }

    static GaussianCopula equicorrelated(int d, double rho) {
        Eigen::MatrixXd c = Eigen::MatrixXd::Constant(d, d, rho);
        c.diagonal().setOnes();
        return GaussianCopula(c);
    }

    [[nodiscard]] int dim() const { return static_cast<int>(chol_.rows()); }

    [[nodiscard]] Matrix sample(Eigen::Index n, Rng& rng) const {
        const auto d = chol_.rows();
        Matrix u(n, d);
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
            const Eigen::VectorXd x = chol_ * z;
            for (Eigen::Index j = 0; j < d; ++j)
                u(i, j) = std::clamp(normal_cdf(x[j]), 0x1.0p-53, 1.0 - 0x1.0p-53);
        }
        return u;
    }

    DependenceDraw operator()(Eigen::Index n, Rng& rng) const { return {sample(n, rng), {}}; }

private:
    Eigen::MatrixXd chol_;
};

/// Kendall's tau of a bivariate Gaussian copula with correlation rho.
inline double gaussian_copula_tau(double rho) { return 2.0 * std::asin(rho) / std::numbers::pi; }

/// Multivariate series with ARMA-GARCH margins and copula-dependent scaled t innovations.
struct SyntheticSeries {
    Matrix x;           // T x d
    Matrix innovations;  // T x d, the Z_t actually used
};

template <typename Copula>
SyntheticSeries simulate_series(const std::vector<ArmaGarchParams>& margins, const Copula& copula, Eigen::Index length,
                                Rng& rng, Eigen::Index burn_in = 250) {
    require(!margins.empty() && static_cast<int>(margins.size()) == copula.dim(), "simulate_series: dimension mismatch");
    const auto d = static_cast<Eigen::Index>(margins.size());
    const Eigen::Index total = length + burn_in;
    const Matrix u = copula.sample(total, rng);
    SyntheticSeries out;
    out.x.resize(length, d);
    out.innovations.resize(length, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const auto& p = margins[static_cast<std::size_t>(j)];
        p.validate();
        std::vector<double> z(static_cast<std::size_t>(total));
        for (Eigen::Index t = 0; t < total; ++t) z[static_cast<std::size_t>(t)] = scaled_t_quantile(u(t, j), p.nu);
        const auto lags = static_cast<std::size_t>(std::max(p.orders().max_lag(), 1));
        LaggedState start;
        start.x.assign(lags, p.mu);
        start.mu.assign(lags, p.mu);
        start.sigma2.assign(lags, p.unconditional_variance());
        const auto xs = arma_garch_simulate(p, z, start);
        for (Eigen::Index t = 0; t < length; ++t) {
            out.x(t, j) = xs[static_cast<std::size_t>(burn_in + t)];
            out.innovations(t, j) = z[static_cast<std::size_t>(burn_in + t)];
        }
    }
    return out;
}

/// Parameters used for synthetic benchmark margins.
inline ArmaGarchParams benchmark_margin(double mu = 0.0, double phi = 0.3, double gamma = -0.2, double omega = 0.05,
                                        double alpha = 0.1, double beta = 0.8, double nu = 6.0) {
    ArmaGarchParams p;
    p.mu = mu;
    p.phi = {phi};
    p.gamma = {gamma};
    p.omega = omega;
    p.alpha = {alpha};
    p.beta = {beta};
    p.nu = nu;
    return p;
}

}  // namespace gmmn_garch
