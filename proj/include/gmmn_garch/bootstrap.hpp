#pragma once

#include "gmmn_garch/copula.hpp"
#include "gmmn_garch/core.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/rng.hpp"

#include <functional>
#include <vector>

namespace gmmn_garch {

/// Fits one dependence model to a replicate's pseudo-observations. The seed
/// is distinct per replicate.
using DependenceFitter = std::function<DependenceModel(const PseudoSample&, std::uint64_t replicate_seed)>;

inline DependenceFitter make_fitter(const DependenceSpec& spec) {
    return [spec](const PseudoSample& ps, std::uint64_t seed) { return fit_dependence(spec, ps, seed); };
}

/// Resample the rows of y_hat n_bt times (size tau, with replacement) and
/// fit one dependence model plus one set of quantile tables per replicate.
///
/// `resampled_rows`, when given, receives the row indices of each replicate.
inline BootstrapMixture bootstrap_fit(const Matrix& y_hat, std::size_t n_bt, const DependenceFitter& fitter, Rng& rng,
                                      std::vector<std::vector<Eigen::Index>>* resampled_rows = nullptr) {
    if (n_bt < 1) throw ConfigError("bootstrap_fit: n_bt must be >= 1");
    require(y_hat.rows() >= 1, "bootstrap_fit: empty sample");
    const Eigen::Index tau = y_hat.rows();
    const std::uint64_t fit_base = rng.next_u64();
    BootstrapMixture mix;
    mix.components.reserve(n_bt);
    mix.component_quantiles.reserve(n_bt);
    if (resampled_rows) resampled_rows->assign(n_bt, {});
    for (std::size_t b = 0; b < n_bt; ++b) {
        Matrix sample(tau, y_hat.cols());
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(tau));
        for (Eigen::Index t = 0; t < tau; ++t) {
            rows[static_cast<std::size_t>(t)] = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(tau)));
            sample.row(t) = y_hat.row(rows[static_cast<std::size_t>(t)]);
        }
        mix.components.push_back(fitter(pseudo_observations(sample), derive_seed(fit_base, b)));
        mix.component_quantiles.push_back(column_quantiles(sample));
        if (resampled_rows) (*resampled_rows)[b] = std::move(rows);
    }
    return mix;
}

}  // namespace gmmn_garch
