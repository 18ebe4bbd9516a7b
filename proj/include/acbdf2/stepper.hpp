#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "acbdf2/errors.hpp"
#include "acbdf2/kernels.hpp"
#include "acbdf2/pcg.hpp"
#include "acbdf2/spatial.hpp"
#include "acbdf2/time_mesh.hpp"

namespace acbdf2 {

struct NewtonConfig {
    /// Max-norm bound on the nonlinear residual.
    double tolerance = 1e-12;
    int max_iterations = 50;
    /// Relative l2 tolerance of each inner PCG solve.
    double linear_tolerance = 1e-13;
    int max_linear_iterations = 1000;

    void validate() const {
        if (!(tolerance >= std::numeric_limits<double>::epsilon()))
            throw std::invalid_argument("Newton tolerance must be at least machine precision");
        if (max_iterations <= 0 || max_linear_iterations <= 0)
            throw std::invalid_argument("iteration limits must be positive");
        if (!(linear_tolerance > 0.0)) throw std::invalid_argument("linear tolerance must be positive");
    }
};

/// Source term g(x, y, t) added to the right-hand side.
using SourceFn = std::function<double(double x, double y, double t)>;

/// Solution history entering the next step.
struct StepperState {
    Field u_prev;                  // u^{n}
    std::optional<Field> u_prev2;  // u^{n-1}; empty before the second step
    std::size_t n = 0;             // index of u_prev
    double t = 0.0;                // t_n
    double tau_prev = 0.0;         // tau_n, 0 before the first step

    explicit StepperState(Field u0) : u_prev(std::move(u0)) {}

    /// Shifts the history after u^{n+1} has been accepted with step tau.
    void push(Field u_next, double tau) {
        u_prev2 = std::move(u_prev);
        u_prev = std::move(u_next);
        ++n;
        t += tau;
        tau_prev = tau;
    }
};

struct StepResult {
    Field u;
    int newton_iterations = 0;
    int linear_iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
};

/// Nonlinear residual of one step:
/// F(u) = b0 (u - u_prev) + b1 (u_prev - u_prev2) - eps^2 Lambda_h u + u^3 - u - g.
/// `lap` is scratch of the field size.
inline void step_residual(const Bdf2Kernel& b, double eps, const Field& u, const Field& u_prev, const Field* u_prev2,
                          const Field* source, std::span<double> lap, std::span<double> out) {
    const Grid2D& g = u.grid();
    laplacian_apply(g, u.values(), lap);
    const double e2 = eps * eps;
    const bool two_level = b.b1 != 0.0;
    if (two_level && u_prev2 == nullptr) throw std::invalid_argument("BDF2 step needs u^{n-2}");
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double v = u[k];
        double r = b.b0 * (v - u_prev[k]) - e2 * lap[k] + v * v * v - v;
        if (two_level) r += b.b1 * (u_prev[k] - (*u_prev2)[k]);
        if (source) r -= (*source)[k];
        out[k] = r;
    }
}

/// Jacobian action J v = (b0 - 1 + 3 u^2) v - eps^2 Lambda_h v.
inline void step_jacobian_apply(double b0, double eps, const Field& u, std::span<const double> v, std::span<double> out) {
    laplacian_apply(u.grid(), v, out);
    const double e2 = eps * eps;
    for (std::size_t k = 0; k < u.size(); ++k) out[k] = (b0 - 1.0 + 3.0 * u[k] * u[k]) * v[k] - e2 * out[k];
}

/// Newton solver for one implicit step on a fixed grid. Keeps scratch
/// buffers between calls.
class AllenCahnStepper {
public:
    AllenCahnStepper(const Grid2D& grid, double eps, NewtonConfig cfg = {})
        : grid_(grid), eps_(eps), cfg_(cfg), lap_(grid.size()), res_(grid.size()), delta_(grid.size()),
          diag_(grid.size()), rhs_(grid.size()) {
        if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
        cfg_.validate();
    }

    const Grid2D& grid() const noexcept { return grid_; }
    double eps() const noexcept { return eps_; }
    const NewtonConfig& config() const noexcept { return cfg_; }

    /// Solves for u^n with step tau and ratio r_n (r = 0 selects BDF1).
    /// The initial guess is u_prev.
    StepResult solve(double tau, double ratio, const Field& u_prev, const Field* u_prev2,
                     const Field* source = nullptr) {
        const Bdf2Kernel b = bdf2_kernel(tau, ratio);
        return solve(b, tau, ratio, u_prev, u_prev2, source);
    }

    StepResult solve(const Bdf2Kernel& b, double tau, double ratio, const Field& u_prev, const Field* u_prev2,
                     const Field* source = nullptr) {
        if (!(tau < solvability_bound(ratio))) throw SolvabilityViolated(tau, ratio, solvability_bound(ratio));

        StepResult out;
        out.u = u_prev;
        Field& u = out.u;
        const double h = grid_.h();
        const double diag_lap = 4.0 * eps_ * eps_ / (h * h);
        const double prev_norm = max_norm(u_prev);
        const double prev2_norm = u_prev2 ? max_norm(*u_prev2) : 0.0;
        const double src_norm = source ? max_norm(*source) : 0.0;

        for (int it = 1; it <= cfg_.max_iterations; ++it) {
            step_residual(b, eps_, u, u_prev, u_prev2, source, lap_, res_);
            const double rnorm = max_norm(res_);
            out.residual_history.push_back(rnorm);
            out.residual = rnorm;
            out.newton_iterations = it;
            // The residual cannot be evaluated more accurately than the
            // rounding in its largest terms; on fine grids eps^2/h^2 pushes
            // that floor above the nominal tolerance.
            const double un = max_norm(u);
            const double scale = b.b0 * (un + prev_norm) + std::abs(b.b1) * (prev_norm + prev2_norm) +
                                 2.0 * diag_lap * un + un * un * un + un + src_norm;
            const double floor = 2.0 * std::numeric_limits<double>::epsilon() * scale;
            if (rnorm <= std::max(cfg_.tolerance, floor)) return out;
            if (!std::isfinite(rnorm) || it == cfg_.max_iterations) break;

            for (std::size_t k = 0; k < u.size(); ++k) {
                diag_[k] = b.b0 - 1.0 + 3.0 * u[k] * u[k] + diag_lap;
                rhs_[k] = -res_[k];
            }
            auto jac = [&](std::span<const double> v, std::span<double> y) { step_jacobian_apply(b.b0, eps_, u, v, y); };
            const PcgResult lin =
                pcg_solve(jac, diag_, rhs_, delta_, cfg_.linear_tolerance, cfg_.max_linear_iterations);
            out.linear_iterations += lin.iterations;
            for (std::size_t k = 0; k < u.size(); ++k) u[k] += delta_[k];
        }
        throw NewtonDiverged(out.newton_iterations, out.residual);
    }

private:
    Grid2D grid_;
    double eps_;
    NewtonConfig cfg_;
    std::vector<double> lap_, res_, delta_, diag_, rhs_;
};

/// Fills `out` with g(x_ij, t).
inline void evaluate_source(const SourceFn& g, double t, Field& out) {
    out.fill([&](double x, double y) { return g(x, y, t); });
}

/// Advances `state` by step n+1 of `mesh` (BDF1 when n+1 == 1).
inline StepResult bdf2_step(const StepperState& state, const TimeMesh& mesh, double eps, const SourceFn& g,
                            const NewtonConfig& cfg = {}) {
    const std::size_t n = state.n + 1;
    if (n > mesh.size()) throw std::out_of_range("bdf2_step: mesh has no step " + std::to_string(n));
    const double tau = mesh.step(n);
    const double r = mesh.ratio(n);
    if (n >= 2 && !state.u_prev2) throw std::invalid_argument("bdf2_step: missing u^{n-2}");
    AllenCahnStepper stepper(state.u_prev.grid(), eps, cfg);
    std::optional<Field> src;
    if (g) {
        src.emplace(state.u_prev.grid());
        evaluate_source(g, state.t + tau, *src);
    }
    return stepper.solve(tau, r, state.u_prev, n >= 2 ? &*state.u_prev2 : nullptr, src ? &*src : nullptr);
}

// ---------------------------------------------------------------------------
// Discrete energies, weighted by h^2.

/// E[u] = -(eps^2/2) h^2 <u, Lambda_h u> + (h^2/4) sum (1 - u^2)^2.
inline double energy(const Field& u, double eps) {
    const double h2 = u.grid().h() * u.grid().h();
    std::vector<double> lap(u.size());
    laplacian_apply(u.grid(), u.values(), lap);
    double grad = 0.0, bulk = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        grad += u[k] * lap[k];
        const double w = 1.0 - u[k] * u[k];
        bulk += w * w;
    }
    return h2 * (-0.5 * eps * eps * grad + 0.25 * bulk);
}

/// Modified energy E[u_curr] + r_next tau / (2 (1 + r_next)) h^2 sum ((u_curr - u_prev)/tau)^2.
inline double modified_energy_from(double e_curr, const Field& u_curr, const Field& u_prev, double tau, double r_next) {
    const double h2 = u_curr.grid().h() * u_curr.grid().h();
    double s = 0.0;
    for (std::size_t k = 0; k < u_curr.size(); ++k) {
        const double q = (u_curr[k] - u_prev[k]) / tau;
        s += q * q;
    }
    return e_curr + r_next * tau / (2.0 * (1.0 + r_next)) * h2 * s;
}

inline double modified_energy(const Field& u_curr, const Field& u_prev, double tau, double r_next, double eps) {
    if (r_next < 0.0) throw std::invalid_argument("modified_energy: r_next must be nonnegative");
    return modified_energy_from(energy(u_curr, eps), u_curr, u_prev, tau, r_next);
}

}  // namespace acbdf2
