#pragma once

#include "gmmn_garch/core.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace gmmn_garch {

struct MinimizeOptions {
    int max_iterations = 500;
    double relative_tolerance = 1e-8;  // on successive objective values
    double gradient_tolerance = 1e-7;
    double fd_step = 1e-6;
};

struct MinimizeResult {
    Vector x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline Vector central_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                               double step) {
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x[i]));
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace detail

/// BFGS with central-difference gradients and a backtracking Armijo line search.
///
/// The objective may return +inf (or NaN) for infeasible points; the line
/// search treats those as failed trials and shrinks the step.
inline MinimizeResult minimize_bfgs(const std::function<double(const Vector&)>& f, Vector x0,
                                    const MinimizeOptions& opt = {}) {
    const auto n = x0.size();
    MinimizeResult res;
    res.x = std::move(x0);
    res.value = f(res.x);
    if (!std::isfinite(res.value)) return res;

    Matrix inv_hessian = Matrix::Identity(n, n);
    Vector grad = detail::central_gradient(f, res.x, opt.fd_step);

    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        if (!grad.allFinite()) break;
        if (grad.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
            res.converged = true;
            break;
        }

        Vector direction = -(inv_hessian * grad);
        double slope = grad.dot(direction);
        if (!(slope < 0.0)) {
            inv_hessian.setIdentity();
            direction = -grad;
            slope = -grad.squaredNorm();
        }

        double step = 1.0;
        Vector candidate;
        double candidate_value = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int trial = 0; trial < 60; ++trial) {
            candidate = res.x + step * direction;
            candidate_value = f(candidate);
            if (std::isfinite(candidate_value) && candidate_value <= res.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Already at the resolution of the finite-difference gradient.
            res.converged = true;
            break;
        }

        Vector new_grad = detail::central_gradient(f, candidate, opt.fd_step);
        const Vector s = candidate - res.x;
        const Vector y = new_grad - grad;
        const double sy = s.dot(y);

        const double previous = res.value;
        res.x = std::move(candidate);
        res.value = candidate_value;
        grad = std::move(new_grad);

        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Vector hy = inv_hessian * y;
            inv_hessian += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
                           rho * (hy * s.transpose() + s * hy.transpose());
        }

        if (std::abs(previous - res.value) <= opt.relative_tolerance * std::max(1.0, std::abs(previous))) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace gmmn_garch
