#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace acbdf2 {

/// Zero-stability ratio limit 1 + sqrt(2) (condition S0).
inline const double kRatioLimitS0 = 1.0 + std::sqrt(2.0);
/// Energy-stability ratio limit (3 + sqrt(17)) / 2 (condition S1).
inline const double kRatioLimitS1 = (3.0 + std::sqrt(17.0)) / 2.0;

/// Nonuniform time grid 0 = t_0 < t_1 < ... < t_N.
///
/// Steps are addressed with the 1-based index used throughout the scheme:
/// step(n) = t_n - t_{n-1} for 1 <= n <= N. Ratios are recomputed from the
/// stored steps on every call, with ratio(1) = 0.
class TimeMesh {
public:
    explicit TimeMesh(std::vector<double> steps) : steps_(std::move(steps)) {
        if (steps_.empty()) throw std::invalid_argument("TimeMesh needs at least one step");
        for (double tau : steps_) {
            if (!(tau > 0.0) || !std::isfinite(tau))
                throw std::invalid_argument("TimeMesh steps must be finite and positive");
        }
    }

    static TimeMesh uniform(double tau, std::size_t count) {
        return TimeMesh(std::vector<double>(count, tau));
    }

    std::size_t size() const noexcept { return steps_.size(); }
    std::span<const double> steps() const noexcept { return steps_; }

    double step(std::size_t n) const { return steps_.at(checked(n) - 1); }

    double ratio(std::size_t n) const {
        checked(n);
        return n == 1 ? 0.0 : steps_[n - 1] / steps_[n - 2];
    }

    /// r_{n+1}, taken as 0 past the last step.
    double next_ratio(std::size_t n) const { return n >= size() ? 0.0 : ratio(n + 1); }

    double time(std::size_t n) const {
        if (n > size()) throw std::out_of_range("time level beyond mesh");
        double t = 0.0;
        for (std::size_t k = 0; k < n; ++k) t += steps_[k];
        return t;
    }

    double final_time() const { return time(size()); }

    std::vector<double> times() const {
        std::vector<double> out(size() + 1, 0.0);
        for (std::size_t k = 1; k <= size(); ++k) out[k] = out[k - 1] + steps_[k - 1];
        return out;
    }

    double max_step() const {
        double m = 0.0;
        for (double tau : steps_) m = std::max(m, tau);
        return m;
    }

    double max_ratio() const {
        double m = 0.0;
        for (std::size_t n = 2; n <= size(); ++n) m = std::max(m, ratio(n));
        return m;
    }

private:
    std::size_t checked(std::size_t n) const {
        if (n < 1 || n > steps_.size()) throw std::out_of_range("step index outside 1..N");
        return n;
    }

    std::vector<double> steps_;
};

/// Writes one step per line with round-trip precision.
inline void write_mesh(std::ostream& os, const TimeMesh& mesh) {
    os << std::setprecision(17);
    for (double tau : mesh.steps()) os << tau << '\n';
}

inline TimeMesh read_mesh(std::istream& is) {
    std::vector<double> steps;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        double tau = 0.0;
        if (!(ls >> tau)) throw std::runtime_error("mesh line " + std::to_string(lineno) + ": not a number");
        steps.push_back(tau);
    }
    return TimeMesh(std::move(steps));
}

// ---------------------------------------------------------------------------
// Step-ratio and step-size admissibility.

inline bool ratio_ok_s0(double r) { return r > 0.0 && r < kRatioLimitS0; }
inline bool ratio_ok_s1(double r) { return r > 0.0 && r < kRatioLimitS1; }

/// Per-step S0 flags; index k-1 holds step k. Step 1 is always admissible.
inline std::vector<bool> check_s0(const TimeMesh& mesh) {
    std::vector<bool> ok(mesh.size(), true);
    for (std::size_t n = 2; n <= mesh.size(); ++n) ok[n - 1] = ratio_ok_s0(mesh.ratio(n));
    return ok;
}

inline std::vector<bool> check_s1(const TimeMesh& mesh) {
    std::vector<bool> ok(mesh.size(), true);
    for (std::size_t n = 2; n <= mesh.size(); ++n) ok[n - 1] = ratio_ok_s1(mesh.ratio(n));
    return ok;
}

/// Unique solvability needs tau_n strictly below this value.
inline double solvability_bound(double r) { return (1.0 + 2.0 * r) / (1.0 + r); }

/// Largest tau_k allowed by the discrete energy law; may be non-positive when
/// r_next is too large for the current ratio.
inline double energy_law_bound(double r, double r_next) {
    double second = (2.0 + 4.0 * r - r * r) / (1.0 + r) - r_next / (1.0 + r_next);
    return std::min(solvability_bound(r), second);
}

/// Step-size bound under which the recombined matrices stay nonnegative
/// (S = 2 gives the maximum-principle condition). Non-positive when eta is
/// incompatible with r.
inline double max_principle_bound(double r, double eta, double S, double eps, double h) {
    double kernel_part = ((1.0 + 2.0 * r) * eta - r * r) / (eta * eta * (1.0 + r));
    return kernel_part * (1.0 - eta) / (S + 4.0 * eps * eps / (h * h));
}

/// Inputs for the maximum-principle column of a ConstraintReport.
struct MaxPrincipleParams {
    double eta;
    double eps;
    double h;
    double S = 2.0;
};

struct ConstraintReport {
    std::vector<bool> s0;
    std::vector<bool> s1;
    std::vector<bool> solvability;
    std::vector<bool> energy_law;
    std::vector<bool> max_principle;

    std::optional<std::size_t> first_s0_violation;
    std::optional<std::size_t> first_s1_violation;
    std::optional<std::size_t> first_solvability_violation;
    std::optional<std::size_t> first_energy_law_violation;
    std::optional<std::size_t> first_max_principle_violation;

    bool all_ok() const {
        return !first_s0_violation && !first_s1_violation && !first_solvability_violation &&
               !first_energy_law_violation && !first_max_principle_violation;
    }
};

namespace detail {
inline std::optional<std::size_t> first_false(const std::vector<bool>& flags) {
    for (std::size_t k = 0; k < flags.size(); ++k)
        if (!flags[k]) return k + 1;
    return std::nullopt;
}
}  // namespace detail

/// Evaluates every admissibility condition on a finished mesh. Violations are
/// reported, never corrected.
inline ConstraintReport check_constraints(const TimeMesh& mesh, const MaxPrincipleParams& mp) {
    ConstraintReport rep;
    rep.s0 = check_s0(mesh);
    rep.s1 = check_s1(mesh);
    const std::size_t N = mesh.size();
    rep.solvability.assign(N, true);
    rep.energy_law.assign(N, true);
    rep.max_principle.assign(N, true);
    for (std::size_t n = 1; n <= N; ++n) {
        const double tau = mesh.step(n);
        const double r = mesh.ratio(n);
        rep.solvability[n - 1] = tau < solvability_bound(r);
        rep.energy_law[n - 1] = tau <= energy_law_bound(r, mesh.next_ratio(n));
        const bool eta_ok = r * r / (1.0 + 2.0 * r) <= mp.eta && mp.eta < 1.0;
        rep.max_principle[n - 1] =
            eta_ok && rep.s0[n - 1] && tau <= max_principle_bound(r, mp.eta, mp.S, mp.eps, mp.h);
    }
    rep.first_s0_violation = detail::first_false(rep.s0);
    rep.first_s1_violation = detail::first_false(rep.s1);
    rep.first_solvability_violation = detail::first_false(rep.solvability);
    rep.first_energy_law_violation = detail::first_false(rep.energy_law);
    rep.first_max_principle_violation = detail::first_false(rep.max_principle);
    return rep;
}

}  // namespace acbdf2
