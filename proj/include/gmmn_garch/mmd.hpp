#pragma once

#include "gmmn_garch/core.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace gmmn_garch {

/// Bandwidths of a mixture of Gaussian kernels.
struct KernelSpec {
    std::vector<double> bandwidths;

    /// GMMN training kernel.
    static KernelSpec training_default() { return {{0.001, 0.01, 0.15, 0.25, 0.50, 0.75}}; }
    /// Out-of-sample assessment kernel.
    static KernelSpec assessment_default() { return {{0.1, 0.3, 0.5, 0.7, 0.9}}; }

    void validate() const {
        if (bandwidths.empty()) throw InputError("KernelSpec: at least one bandwidth is required");
        if (bandwidths.size() > 31) throw InputError("KernelSpec: at most 31 bandwidths are supported");
        for (double s : bandwidths)
            if (!(s > 0.0) || !std::isfinite(s)) throw InputError("KernelSpec: bandwidths must be positive");
    }

    bool operator==(const KernelSpec&) const = default;
};

namespace detail {

// exp(-x) is exactly 0.0 in double precision beyond this point.
inline constexpr double kExpUnderflow = 746.0;

/// Precomputed 1 / (2 sigma^2) and 1 / sigma^2 per bandwidth.
class KernelTable {
public:
    explicit KernelTable(const KernelSpec& spec) {
        spec.validate();
        for (double s : spec.bandwidths) {
            half_inv_.push_back(1.0 / (2.0 * s * s));
            inv_.push_back(1.0 / (s * s));
        }
    }

    [[nodiscard]] std::size_t size() const { return inv_.size(); }

    [[nodiscard]] double value(double d2) const {
        double k = 0.0;
        for (double c : half_inv_) {
            const double arg = d2 * c;
            if (arg < kExpUnderflow) k += std::exp(-arg);
        }
        return k;
    }

    /// Kernel value and the weight w = sum_i k_i / sigma_i^2, so that
    /// dK(x, y)/dy = w (x - y).
    void value_and_weight(double d2, double& k, double& w) const {
        k = 0.0;
        w = 0.0;
        for (std::size_t i = 0; i < inv_.size(); ++i) {
            const double arg = d2 * half_inv_[i];
            if (arg < kExpUnderflow) {
                const double e = std::exp(-arg);
                k += e;
                w += e * inv_[i];
            }
        }
    }

private:
    std::vector<double> half_inv_;
    std::vector<double> inv_;
};

inline double squared_distance(const double* x, const double* y, Eigen::Index d) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = x[j] - y[j];
        s += diff * diff;
    }
    return s;
}

/// Order-independent accumulator: each term is truncated to a multiple of
/// 2^-58 and summed exactly in 128-bit integers. Kernel values lie in
/// [0, 31], so terms fit in 63 bits.
class FixedSum {
public:
    void add(double v) { acc_ += static_cast<std::int64_t>(v * 0x1p58); }
    [[nodiscard]] double value() const { return static_cast<double>(acc_) * 0x1p-58; }
    FixedSum& operator+=(const FixedSum& o) {
        acc_ += o.acc_;
        return *this;
    }
    bool operator==(const FixedSum&) const = default;

private:
    __extension__ __int128 acc_ = 0;
};

inline FixedSum kernel_sum(const Matrix& a, const Matrix& b, const KernelTable& table) {
    FixedSum sum;
    const Eigen::Index d = a.cols();
    for (Eigen::Index s = 0; s < a.rows(); ++s) {
        const double* x = a.row(s).data();
        for (Eigen::Index t = 0; t < b.rows(); ++t) sum.add(table.value(squared_distance(x, b.row(t).data(), d)));
    }
    return sum;
}

/// Squared MMD from the three pair sums; symmetric in (a, b) bit for bit.
inline double mmd2_from_sums(const FixedSum& aa, const FixedSum& ab, const FixedSum& bb, double na, double nb) {
    const double t_aa = aa.value() / (na * na);
    const double t_bb = bb.value() / (nb * nb);
    const double t_ab = 2.0 * ab.value() / (na * nb);
    return (t_aa + t_bb) - t_ab;
}

}  // namespace detail

/// Mixture of Gaussian kernels: sum_i exp(-|u - v|^2 / (2 sigma_i^2)).
inline double kernel_mix(std::span<const double> u, std::span<const double> v, const KernelSpec& k) {
    require(u.size() == v.size(), "kernel_mix: dimension mismatch");
    const detail::KernelTable table(k);
    return table.value(detail::squared_distance(u.data(), v.data(), static_cast<Eigen::Index>(u.size())));
}

/// Biased (V-statistic) maximum mean discrepancy between two samples,
/// including the diagonal terms; the radicand is clamped at 0.
inline double mmd(const Matrix& a, const Matrix& b, const KernelSpec& k) {
    if (a.rows() < 1 || b.rows() < 1) throw InputError("mmd: empty sample");
    require(a.cols() == b.cols(), "mmd: dimension mismatch");
    const detail::KernelTable table(k);
    const auto aa = detail::kernel_sum(a, a, table);
    const auto ab = detail::kernel_sum(a, b, table);
    const auto bb = detail::kernel_sum(b, b, table);
    const double m2 =
        detail::mmd2_from_sums(aa, ab, bb, static_cast<double>(a.rows()), static_cast<double>(b.rows()));
    return std::sqrt(std::max(m2, 0.0));
}

struct MmdGradient {
    double loss = 0.0;  // MMD (not squared)
    Matrix d_generated;  // dMMD / d(generated sample), same shape as the sample
};

/// MMD between a fixed target and a generated sample, with the gradient
/// with respect to the generated points.
///
/// The gradient of MMD^2 is converted by the chain rule with the
/// denominator clamped at 1e-12; when MMD is exactly 0 the gradient is 0.
/// `target_sum`, when given, is the precomputed target-target pair sum.
inline MmdGradient mmd_with_gradient(const Matrix& target, const Matrix& generated, const KernelSpec& k,
                                     const detail::FixedSum* target_sum = nullptr) {
    if (target.rows() < 1 || generated.rows() < 1) throw InputError("mmd: empty sample");
    require(target.cols() == generated.cols(), "mmd: dimension mismatch");
    const detail::KernelTable table(k);
    const Eigen::Index n = target.rows();
    const Eigen::Index m = generated.rows();
    const Eigen::Index d = target.cols();

    const detail::FixedSum tt = target_sum ? *target_sum : detail::kernel_sum(target, target, table);
    detail::FixedSum tg;
    detail::FixedSum gg;
    Matrix grad2 = Matrix::Zero(m, d);  // dMMD^2 / dg

    const double c_cross = 2.0 / (static_cast<double>(n) * static_cast<double>(m));
    const double c_self = 2.0 / (static_cast<double>(m) * static_cast<double>(m));
    double kv = 0.0;
    double w = 0.0;
    for (Eigen::Index s = 0; s < m; ++s) {
        const double* g = generated.row(s).data();
        double* out = grad2.row(s).data();
        for (Eigen::Index t = 0; t < n; ++t) {
            const double* u = target.row(t).data();
            table.value_and_weight(detail::squared_distance(u, g, d), kv, w);
            tg.add(kv);
            // d/dg of -c_cross/2 * 2 K(u, g)
            for (Eigen::Index j = 0; j < d; ++j) out[j] -= c_cross * w * (u[j] - g[j]);
        }
        for (Eigen::Index t = 0; t < m; ++t) {
            const double* h = generated.row(t).data();
            table.value_and_weight(detail::squared_distance(g, h, d), kv, w);
            gg.add(kv);
            // g_s appears in both (s, t) and (t, s).
            for (Eigen::Index j = 0; j < d; ++j) out[j] += c_self * w * (h[j] - g[j]);
        }
    }

    const double m2 = detail::mmd2_from_sums(tt, tg, gg, static_cast<double>(n), static_cast<double>(m));
    MmdGradient res;
    if (m2 <= 0.0) {
        res.loss = 0.0;
        res.d_generated = Matrix::Zero(m, d);
        return res;
    }
    res.loss = std::sqrt(m2);
    res.d_generated = grad2 / (2.0 * std::max(res.loss, 1e-12));
    return res;
}

}  // namespace gmmn_garch
