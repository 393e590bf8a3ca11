#pragma once

#include "gmmn_garch/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace gmmn_garch {

/// Principal axes of the standardized residuals and the d x k lifting matrix.
///
/// With reduction disabled `upsilon` is the d x d identity and k = d, so
/// project and lift are identity maps.
struct PcaTransform {
    Matrix gamma;                 // d x d, columns = eigenvectors
    std::vector<double> lambdas;  // descending, >= 0
    int k = 0;
    Matrix upsilon;  // d x k
    bool reduced = false;

    [[nodiscard]] int dim() const { return static_cast<int>(gamma.rows()); }

    /// Fraction of total variance explained by the first j components.
    [[nodiscard]] double explained(int j) const {
        const double total = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
        const double part = std::accumulate(lambdas.begin(), lambdas.begin() + j, 0.0);
        return part / total;
    }

    static PcaTransform identity(int d) {
        PcaTransform t;
        t.gamma = Matrix::Identity(d, d);
        t.lambdas.assign(static_cast<std::size_t>(d), 1.0);
        t.k = d;
        t.upsilon = Matrix::Identity(d, d);
        t.reduced = false;
        return t;
    }
};

inline Matrix sample_covariance(const Matrix& z) {
    const Eigen::RowVectorXd mean = z.colwise().mean();
    const Matrix centered = z.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(z.rows() - 1);
}

/// Eigendecomposition of the sample covariance (divisor tau - 1) of z.
///
/// Eigenvectors are sign-normalized so that each column's largest-magnitude
/// entry is positive. The returned transform keeps all d components.
inline PcaTransform fit_pca(const Matrix& z) {
    if (z.rows() < 2) throw InputError("fit_pca: at least two observations are required");
    if (!z.allFinite()) throw InputError("fit_pca: non-finite residuals");
    const Matrix cov = sample_covariance(z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericalError("fit_pca: eigendecomposition failed");

    const auto d = cov.rows();
    PcaTransform t;
    t.gamma.resize(d, d);
    t.lambdas.resize(static_cast<std::size_t>(d));
    // Eigen returns ascending order.
    for (Eigen::Index j = 0; j < d; ++j) {
        const Eigen::Index src = d - 1 - j;
        double lambda = solver.eigenvalues()[src];
        if (lambda < 0.0) {
            if (lambda < -1e-10) throw NumericalError("fit_pca: covariance has a negative eigenvalue");
            lambda = 0.0;
        }
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        t.gamma.col(j) = v;
        t.lambdas[static_cast<std::size_t>(j)] = lambda;
    }
    t.k = static_cast<int>(d);
    t.upsilon = t.gamma;
    t.reduced = false;
    return t;
}

/// Smallest k >= min(k_min, d) whose leading components explain at least `threshold`.
inline int select_k(const std::vector<double>& lambdas, double threshold = 0.95, int k_min = 3) {
    require(!lambdas.empty(), "select_k: empty spectrum");
    const double total = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
    if (!(total > 0.0)) throw DegenerateInputError("select_k: all eigenvalues are zero");
    const int d = static_cast<int>(lambdas.size());
    const int floor_k = std::clamp(k_min, 1, d);
    double cumulative = 0.0;
    for (int k = 1; k <= d; ++k) {
        cumulative += lambdas[static_cast<std::size_t>(k - 1)];
        if (k >= floor_k && cumulative / total >= threshold) return k;
    }
    return d;
}

/// Keep the first k principal axes.
inline PcaTransform truncate(PcaTransform t, int k) {
    require(k >= 1 && k <= t.dim(), "PcaTransform: k must lie in [1, d]");
    t.k = k;
    t.upsilon = t.gamma.leftCols(k);
    t.reduced = k < t.dim();
    return t;
}

/// y = upsilon^T z
inline Vector project(const PcaTransform& t, const Vector& z) {
    require(z.size() == t.upsilon.rows(), "project: dimension mismatch");
    return t.upsilon.transpose() * z;
}

/// z = upsilon y
inline Vector lift(const PcaTransform& t, const Vector& y) {
    require(y.size() == t.upsilon.cols(), "lift: dimension mismatch");
    return t.upsilon * y;
}

/// Row-wise projection of a sample matrix (rows are observations).
inline Matrix project_rows(const PcaTransform& t, const Matrix& z) {
    require(z.cols() == t.upsilon.rows(), "project_rows: dimension mismatch");
    return z * t.upsilon;
}

inline Matrix lift_rows(const PcaTransform& t, const Matrix& y) {
    require(y.cols() == t.upsilon.cols(), "lift_rows: dimension mismatch");
    return y * t.upsilon.transpose();
}

}  // namespace gmmn_garch
