#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "acbdf2/spatial.hpp"

namespace acbdf2 {

struct PcgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients for an SPD operator given
/// matrix-free. `apply(x, y)` writes y = A x; `diag` is the diagonal of A.
/// Solves A x = b starting from x = 0 and stops when ||r||_2 <= rel_tol ||b||_2.
template <class ApplyFn>
PcgResult pcg_solve(ApplyFn&& apply, std::span<const double> diag, std::span<const double> b, std::span<double> x,
                    double rel_tol, int max_iter) {
    const std::size_t n = b.size();
    std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
    std::fill(x.begin(), x.end(), 0.0);

    PcgResult res;
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = dot(r, z);
    double rnorm = bnorm;

    while (res.iterations < max_iter) {
        apply(std::span<const double>(p), std::span<double>(q));
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        ++res.iterations;
        rnorm = std::sqrt(dot(r, r));
        if (rnorm <= rel_tol * bnorm) break;
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    res.relative_residual = rnorm / bnorm;
    res.converged = rnorm <= rel_tol * bnorm;
    return res;
}

}  // namespace acbdf2
