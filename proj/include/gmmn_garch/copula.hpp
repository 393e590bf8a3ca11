#pragma once

#include "gmmn_garch/core.hpp"
#include "gmmn_garch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace gmmn_garch {

/// Rank-based pseudo-observations u = R / (n + 1).
struct PseudoSample {
    Matrix u;
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ranks;

    [[nodiscard]] Eigen::Index size() const { return u.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return u.cols(); }
};

/// Column-wise ranks of y. Ties are broken by row index (first occurrence
/// ranks lower), so every column of u is exactly {1, ..., n} / (n + 1).
inline PseudoSample pseudo_observations(const Matrix& y) {
    require(y.rows() >= 1, "pseudo_observations: empty sample");
    if (!y.allFinite()) throw InputError("pseudo_observations: non-finite entries");
    const auto n = y.rows();
    const auto d = y.cols();
    PseudoSample ps;
    ps.u.resize(n, d);
    ps.ranks.resize(n, d);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    const double denom = static_cast<double>(n + 1);
    for (Eigen::Index j = 0; j < d; ++j) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return y(a, j) < y(b, j); });
        for (Eigen::Index r = 0; r < n; ++r) {
            const Eigen::Index row = order[static_cast<std::size_t>(r)];
            ps.ranks(row, j) = static_cast<int>(r + 1);
            ps.u(row, j) = static_cast<double>(r + 1) / denom;
        }
    }
    return ps;
}

/// Resample rows of the pseudo-observations with replacement.
inline Matrix sample_empirical(const PseudoSample& ps, Eigen::Index n_gen, Rng& rng) {
    require(ps.size() >= 1, "sample_empirical: empty pseudo-sample");
    Matrix out(n_gen, ps.dim());
    for (Eigen::Index i = 0; i < n_gen; ++i)
        out.row(i) = ps.u.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(ps.size()))));
    return out;
}

/// Empirical beta copula: pick a row t uniformly, then draw each component
/// from Beta(R_tj, n + 1 - R_tj), the law of the R_tj-th of n uniform order
/// statistics.
inline Matrix sample_empirical_beta(const PseudoSample& ps, Eigen::Index n_gen, Rng& rng) {
    require(ps.size() >= 1, "sample_empirical_beta: empty pseudo-sample");
    const auto n = static_cast<double>(ps.size());
    Matrix out(n_gen, ps.dim());
    for (Eigen::Index i = 0; i < n_gen; ++i) {
        const auto t = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(ps.size())));
        for (Eigen::Index j = 0; j < ps.dim(); ++j) {
            const double r = ps.ranks(t, j);
            double v = rng.beta(r, n + 1.0 - r);
            // Keep the open-interval contract if a gamma draw underflows.
            v = std::clamp(v, 0x1.0p-53, 1.0 - 0x1.0p-53);
            out(i, j) = v;
        }
    }
    return out;
}

inline Matrix sample_independence(Eigen::Index dim, Eigen::Index n_gen, Rng& rng) {
    Matrix out(n_gen, dim);
    for (Eigen::Index i = 0; i < n_gen; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) out(i, j) = rng.uniform();
    return out;
}

/// Lower (type 1) empirical quantile: the ceil(p * n)-th order statistic.
///
/// A relative guard of 1e-9 keeps products such as 0.05 * 100 from rounding
/// up to the next index.
inline std::size_t lower_quantile_index(double p, std::size_t n) {
    const double pos = std::ceil(p * static_cast<double>(n) - 1e-9);
    const auto k = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(n)));
    return k - 1;
}

/// Sorted sample acting as an empirical quantile function.
class EmpiricalQuantile {
public:
    EmpiricalQuantile() = default;

    template <typename Range>
    explicit EmpiricalQuantile(const Range& values) : sorted_(std::begin(values), std::end(values)) {
        require(!sorted_.empty(), "EmpiricalQuantile: empty sample");
        std::sort(sorted_.begin(), sorted_.end());
    }

    [[nodiscard]] double operator()(double p) const { return sorted_[lower_quantile_index(p, sorted_.size())]; }

    [[nodiscard]] const std::vector<double>& sorted() const { return sorted_; }

    static EmpiricalQuantile from_sorted(std::vector<double> sorted) {
        EmpiricalQuantile q;
        q.sorted_ = std::move(sorted);
        return q;
    }

    bool operator==(const EmpiricalQuantile&) const = default;

private:
    std::vector<double> sorted_;
};

/// One empirical quantile table per column of y.
inline std::vector<EmpiricalQuantile> column_quantiles(const Matrix& y) {
    std::vector<EmpiricalQuantile> tables;
    tables.reserve(static_cast<std::size_t>(y.cols()));
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const Eigen::VectorXd col = y.col(j);
        tables.emplace_back(std::vector<double>(col.data(), col.data() + col.size()));
    }
    return tables;
}

}  // namespace gmmn_garch
