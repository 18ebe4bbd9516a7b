#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "acbdf2/spatial.hpp"
#include "acbdf2/stepper.hpp"
#include "acbdf2/time_mesh.hpp"

namespace acbdf2 {

/// Which manufactured source drives the MMS runs.
enum class MmsSource {
    continuous,      // g from the PDE: s cos t + u^3
    grid_consistent  // g from the five-point operator; error is purely temporal
};

/// Manufactured problem on (0,1)^2 with diffusion 1/(8 pi^2) and exact
/// solution sin(2 pi x) sin(2 pi y) sin t.
struct MmsProblem {
    static constexpr double T = 1.0;
    static constexpr double L = 1.0;

    static double eps() { return 1.0 / (2.0 * std::numbers::sqrt2 * std::numbers::pi); }

    static double spatial(double x, double y) {
        return std::sin(2.0 * std::numbers::pi * x) * std::sin(2.0 * std::numbers::pi * y);
    }

    static double exact(double x, double y, double t) { return spatial(x, y) * std::sin(t); }

    /// g = s cos t + (s sin t)^3: the diffusion and -u terms cancel because
    /// eps^2 Delta u = -u for this mode.
    static double source(double x, double y, double t) {
        const double s = spatial(x, y);
        const double u = s * std::sin(t);
        return s * std::cos(t) + u * u * u;
    }

    /// Source for which the grid restriction of the exact solution solves the
    /// semi-discrete system exactly: Lambda_h maps this mode to
    /// lambda_h = -(8/h^2) sin^2(pi h), so the -u term no longer cancels fully.
    /// Removes the O(h^2) spatial error from the measured error.
    static double grid_source(double x, double y, double t, double h) {
        const double s = spatial(x, y);
        const double u = s * std::sin(t);
        const double sh = std::sin(std::numbers::pi * h);
        const double lambda_h = -8.0 * sh * sh / (h * h);
        return s * std::cos(t) + u * u * u - u - eps() * eps() * lambda_h * u;
    }

    static SourceFn source_fn(MmsSource kind, const Grid2D& grid) {
        if (kind == MmsSource::continuous) return &MmsProblem::source;
        const double h = grid.h();
        return [h](double x, double y, double t) { return grid_source(x, y, t, h); };
    }

    static Field exact_field(const Grid2D& grid, double t) {
        Field f(grid);
        f.fill([t](double x, double y) { return exact(x, y, t); });
        return f;
    }
};

/// tau_k = T w_k / sum(w); the last step absorbs the rounding so the steps sum to T.
inline TimeMesh mesh_from_weights(std::span<const double> weights, double T) {
    if (weights.empty()) throw std::invalid_argument("mesh_from_weights: need at least one weight");
    double S = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("mesh_from_weights: weights must be positive");
        S += w;
    }
    std::vector<double> steps(weights.size());
    double partial = 0.0;
    for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
        steps[k] = T * weights[k] / S;
        partial += steps[k];
    }
    steps.back() = T - partial;
    if (!(steps.back() > 0.0)) steps.back() = T * weights.back() / S;
    return TimeMesh(std::move(steps));
}

/// Random mesh with weights drawn uniformly from (0, 1).
inline TimeMesh random_mesh(std::size_t N, double T, std::uint64_t seed) {
    if (N < 1) throw std::invalid_argument("random_mesh: N must be at least 1");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> w(N);
    for (double& v : w) {
        do v = dist(gen);
        while (v == 0.0);
    }
    return mesh_from_weights(w, T);
}

inline std::size_t count_ratios_at_least(const TimeMesh& mesh, double limit) {
    std::size_t c = 0;
    for (std::size_t n = 2; n <= mesh.size(); ++n)
        if (mesh.ratio(n) >= limit) ++c;
    return c;
}

struct ConvergenceRow {
    std::size_t N = 0;
    double tau_max = 0.0;
    double err_inf = 0.0;
    std::optional<double> order;
    std::size_t num_ratio_violations = 0;
    std::uint64_t seed = 0;
    std::vector<int> newton_iterations;  // per step
};

/// log(e1/e2) / log(tau1/tau2); empty when either error vanishes.
inline std::optional<double> convergence_order(double e1, double e2, double tau1, double tau2) {
    if (!(e1 > 0.0) || !(e2 > 0.0) || tau1 == tau2) return std::nullopt;
    return std::log(e1 / e2) / std::log(tau1 / tau2);
}

/// Runs `steps` of the scheme over `mesh` from `state`, calling
/// on_step(n, t_n, result) after each step has been committed.
template <class OnStep>
void integrate_mesh(StepperState& state, const TimeMesh& mesh, AllenCahnStepper& stepper, const SourceFn& g,
                    OnStep&& on_step) {
    Field src(state.u_prev.grid());
    while (state.n < mesh.size()) {
        const std::size_t n = state.n + 1;
        const double tau = mesh.step(n);
        const double r = mesh.ratio(n);
        if (g) evaluate_source(g, state.t + tau, src);
        StepResult res =
            stepper.solve(tau, r, state.u_prev, n >= 2 ? &*state.u_prev2 : nullptr, g ? &src : nullptr);
        Field u = res.u;
        state.push(std::move(u), tau);
        on_step(n, state.t, res);
    }
}

/// Solves the manufactured problem on `mesh` at resolution M and records
/// e = max_n ||U^n - u^n||_inf.
inline ConvergenceRow run_mms_on_mesh(const TimeMesh& mesh, std::size_t M, MmsSource source = MmsSource::continuous,
                                      const NewtonConfig& newton = {}) {
    const Grid2D grid(M, MmsProblem::L);
    StepperState state(MmsProblem::exact_field(grid, 0.0));
    AllenCahnStepper stepper(grid, MmsProblem::eps(), newton);
    ConvergenceRow row;
    row.N = mesh.size();
    row.tau_max = mesh.max_step();
    row.num_ratio_violations = count_ratios_at_least(mesh, kRatioLimitS0);
    integrate_mesh(state, mesh, stepper, MmsProblem::source_fn(source, grid), [&](std::size_t, double t, const StepResult& res) {
        row.newton_iterations.push_back(res.newton_iterations);
        double err = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            const double y = grid.coord(j);
            for (std::size_t i = 0; i < M; ++i)
                err = std::max(err, std::abs(MmsProblem::exact(grid.coord(i), y, t) - res.u[grid.index(i, j)]));
        }
        row.err_inf = std::max(row.err_inf, err);
    });
    return row;
}

inline ConvergenceRow run_mms(std::size_t N, std::uint64_t seed, std::size_t M = 256,
                              MmsSource source = MmsSource::continuous, const NewtonConfig& newton = {}) {
    ConvergenceRow row = run_mms_on_mesh(random_mesh(N, MmsProblem::T, seed), M, source, newton);
    row.seed = seed;
    return row;
}

/// One row per N (in the given order), with orders between consecutive rows.
inline std::vector<ConvergenceRow> convergence_table(std::span<const std::size_t> Ns, std::uint64_t seed,
                                                     std::size_t M = 256, MmsSource source = MmsSource::continuous,
                                                     const NewtonConfig& newton = {}) {
    std::vector<ConvergenceRow> rows;
    for (std::size_t N : Ns) {
        rows.push_back(run_mms(N, seed, M, source, newton));
        if (rows.size() >= 2) {
            const ConvergenceRow& a = rows[rows.size() - 2];
            rows.back().order = convergence_order(a.err_inf, rows.back().err_inf, a.tau_max, rows.back().tau_max);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Initial conditions.

/// Four merging bubbles on (-1,1)^2.
inline Field four_bubble_init(const Grid2D& grid, double eps = 0.02) {
    Field f(grid);
    const double r2 = 0.2 * 0.2;
    f.fill([&](double x, double y) {
        return -std::tanh(((x - 0.3) * (x - 0.3) + y * y - r2) / eps) *
               std::tanh(((x + 0.3) * (x + 0.3) + y * y - r2) / eps) *
               std::tanh((x * x + (y - 0.3) * (y - 0.3) - r2) / eps) *
               std::tanh((x * x + (y + 0.3) * (y + 0.3) - r2) / eps);
    });
    return f;
}

/// base + amp * U(-1, 1) at every node, from a seeded generator.
inline Field coarsening_init(const Grid2D& grid, std::uint64_t seed, double base = 0.0, double amp = 0.05) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Field f(grid);
    for (double& v : f.values()) v = base + amp * dist(gen);
    return f;
}

}  // namespace acbdf2
