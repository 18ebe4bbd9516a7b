#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "acbdf2/errors.hpp"
#include "acbdf2/spatial.hpp"
#include "acbdf2/stepper.hpp"
#include "acbdf2/time_mesh.hpp"

namespace acbdf2 {

enum class ErrorNorm { l2, max };

struct AdaptiveConfig {
    double rho = 0.6;
    double tol = 1e-4;
    double tau_max = 0.1;
    double tau_min = 1e-3;
    /// Upper bound on tau_{n+1}/tau_n; empty disables the cap.
    std::optional<double> ratio_cap = kRatioLimitS0 - 1e-6;
    int max_rejects = 20;
    ErrorNorm norm = ErrorNorm::l2;

    void validate() const {
        if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("adaptive: rho must lie in (0, 1]");
        if (!(tau_min > 0.0 && tau_min <= tau_max)) throw std::invalid_argument("adaptive: need 0 < tau_min <= tau_max");
        if (!(tol > 0.0)) throw std::invalid_argument("adaptive: tol must be positive");
        if (ratio_cap && !(*ratio_cap >= 1.0)) throw std::invalid_argument("adaptive: ratio cap must be >= 1");
        if (max_rejects < 0) throw std::invalid_argument("adaptive: max_rejects must be nonnegative");
    }
};

/// Relative difference ||u2 - u1|| / ||u2|| between the two trial solutions.
inline double error_estimate(const Field& u1, const Field& u2, ErrorNorm norm = ErrorNorm::l2) {
    double num = 0.0, den = 0.0;
    if (norm == ErrorNorm::max) {
        num = max_norm_diff(u1, u2);
        den = max_norm(u2);
    } else {
        for (std::size_t k = 0; k < u1.size(); ++k) {
            const double d = u2[k] - u1[k];
            num += d * d;
            den += u2[k] * u2[k];
        }
        // Both carry the same h^2 weight, which cancels.
        num = std::sqrt(num);
        den = std::sqrt(den);
    }
    if (den == 0.0) throw ZeroReference();
    return num / den;
}

/// rho (tol/e)^{1/2} tau_cur clamped to [tau_min, tau_max]; e == 0 proposes tau_max.
inline double tau_ada(double e, double tau_cur, const AdaptiveConfig& cfg) {
    if (e < 0.0) throw std::invalid_argument("tau_ada: negative error estimate");
    if (e == 0.0) return cfg.tau_max;
    const double proposed = cfg.rho * std::sqrt(cfg.tol / e) * tau_cur;
    return std::clamp(proposed, cfg.tau_min, cfg.tau_max);
}

struct AdaptiveAttempt {
    double tau = 0.0;
    double ratio = 0.0;
    double e = 0.0;
    int newton_iterations = 0;
    double max_norm = 0.0;
    double energy = 0.0;
    bool accepted = false;
};

struct AdaptiveStep {
    Field u;
    double tau = 0.0;
    double ratio = 0.0;
    double e = 0.0;
    double tau_next = 0.0;
    int newton_iterations = 0;
    /// Accepted although e >= tol because tau could not shrink further.
    bool floored = false;
    std::vector<AdaptiveAttempt> rejected;
};

/// First-order predictor vs BDF2 comparison with accept/reject and step update.
class AdaptiveController {
public:
    AdaptiveController(AllenCahnStepper& stepper, AdaptiveConfig cfg) : stepper_(stepper), cfg_(cfg), src_(stepper.grid()) {
        cfg_.validate();
    }

    const AdaptiveConfig& config() const noexcept { return cfg_; }

    /// Largest step allowed after a step of size tau by the ratio cap.
    double cap_after(double tau) const { return cfg_.ratio_cap ? *cfg_.ratio_cap * tau : cfg_.tau_max; }

    /// Tries tau (shortened to land on t_end) from `state`, retrying with
    /// smaller steps until the estimate drops below tol.
    AdaptiveStep advance(const StepperState& state, double tau, double t_end, const SourceFn& g = {}) {
        if (!(tau > 0.0)) throw std::invalid_argument("advance: step must be positive");
        AdaptiveStep out;
        const Field* prev2 = state.u_prev2 ? &*state.u_prev2 : nullptr;
        int rejects = 0;
        for (;;) {
            const double remaining = t_end - state.t;
            const double tau_eff = std::min(tau, remaining);
            const double ratio = state.n == 0 ? 0.0 : tau_eff / state.tau_prev;
            const Field* src = nullptr;
            if (g) {
                evaluate_source(g, state.t + tau_eff, src_);
                src = &src_;
            }
            StepResult be = stepper_.solve(tau_eff, 0.0, state.u_prev, nullptr, src);
            StepResult bdf = ratio == 0.0 ? be : stepper_.solve(tau_eff, ratio, state.u_prev, prev2, src);
            const double e = error_estimate(be.u, bdf.u, cfg_.norm);

            const double proposal = tau_ada(e, tau_eff, cfg_);
            const bool ok = e < cfg_.tol;
            const bool floored = !ok && proposal >= tau_eff;
            if (ok || floored) {
                out.tau = tau_eff;
                out.ratio = ratio;
                out.e = e;
                out.newton_iterations = bdf.newton_iterations;
                out.floored = floored;
                out.tau_next = std::min(proposal, cap_after(tau_eff));
                out.u = std::move(bdf.u);
                return out;
            }
            out.rejected.push_back({tau_eff, ratio, e, bdf.newton_iterations, max_norm(bdf.u),
                                    energy(bdf.u, stepper_.eps()), false});
            if (++rejects > cfg_.max_rejects) throw TooManyRejects(state.t, rejects);
            tau = proposal;
        }
    }

private:
    AllenCahnStepper& stepper_;
    AdaptiveConfig cfg_;
    Field src_;
};

}  // namespace acbdf2
