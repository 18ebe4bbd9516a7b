#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "acbdf2/adaptive.hpp"
#include "acbdf2/config.hpp"
#include "acbdf2/errors.hpp"
#include "acbdf2/experiments.hpp"
#include "acbdf2/kernels.hpp"
#include "acbdf2/spatial.hpp"
#include "acbdf2/stepper.hpp"
#include "acbdf2/time_mesh.hpp"

namespace acbdf2 {

/// One row of steps.csv. Rejected adaptive attempts appear with accepted = false.
struct StepRecord {
    std::size_t n = 0;
    double t = 0.0;
    double tau = 0.0;
    double ratio = 0.0;
    double e_est = 0.0;
    bool accepted = true;
    int newton_iters = 0;
    double max_norm = 0.0;
    double energy = 0.0;
    double modified_energy = 0.0;
    bool s0_ok = true;
    bool maxp_bound_ok = true;
};

inline constexpr const char* kStepsCsvHeader =
    "n,t,tau,ratio,e_est,accepted,newton_iters,max_norm,energy,modified_energy,s0_ok,maxp_bound_ok";

inline void write_step_row(std::ostream& os, const StepRecord& r) {
    os << std::setprecision(17) << r.n << ',' << r.t << ',' << r.tau << ',' << r.ratio << ',' << r.e_est << ','
       << (r.accepted ? 1 : 0) << ',' << r.newton_iters << ',' << r.max_norm << ',' << r.energy << ','
       << r.modified_energy << ',' << (r.s0_ok ? 1 : 0) << ',' << (r.maxp_bound_ok ? 1 : 0) << '\n';
}

struct RunSummary {
    double final_time = 0.0;
    double final_energy = 0.0;
    double final_modified_energy = 0.0;
    double max_norm_overall = 0.0;
    double min_max_norm = std::numeric_limits<double>::infinity();
    std::size_t total_steps = 0;
    std::size_t rejects = 0;
    std::size_t floored_steps = 0;
    double newton_median = 0.0;
    int newton_max = 0;
    /// Accepted steps whose modified energy rose by more than 1e-10 relative.
    std::size_t energy_increases = 0;
    std::size_t s0_violations = 0;
    std::size_t s1_violations = 0;
    std::size_t energy_law_violations = 0;
    std::size_t max_principle_violations = 0;
    double eta = 0.0;
    std::optional<double> max_error;
};

inline void write_summary(std::ostream& os, const RunSummary& s) {
    os << std::setprecision(17);
    os << "final_time = " << s.final_time << '\n'
       << "final_energy = " << s.final_energy << '\n'
       << "final_modified_energy = " << s.final_modified_energy << '\n'
       << "max_norm_overall = " << s.max_norm_overall << '\n'
       << "min_max_norm = " << s.min_max_norm << '\n'
       << "total_steps = " << s.total_steps << '\n'
       << "rejects = " << s.rejects << '\n'
       << "floored_steps = " << s.floored_steps << '\n'
       << "newton_median = " << s.newton_median << '\n'
       << "newton_max = " << s.newton_max << '\n'
       << "energy_increases = " << s.energy_increases << '\n'
       << "s0_violations = " << s.s0_violations << '\n'
       << "s1_violations = " << s.s1_violations << '\n'
       << "energy_law_violations = " << s.energy_law_violations << '\n'
       << "max_principle_violations = " << s.max_principle_violations << '\n'
       << "eta = " << s.eta << '\n';
    if (s.max_error) os << "max_error = " << *s.max_error << '\n';
}

struct RunResult {
    std::vector<StepRecord> records;
    RunSummary summary;
    std::vector<double> steps;  // accepted tau_1..tau_N
    std::vector<int> newton_iterations;
    Field final_field;

    TimeMesh mesh() const { return TimeMesh(steps); }
};

inline Field make_initial_field(const RunConfig& cfg, const Grid2D& grid) {
    switch (cfg.init.kind) {
        case InitKind::four_bubble: return four_bubble_init(grid, cfg.domain.eps);
        case InitKind::coarsening: return coarsening_init(grid, cfg.init.seed, cfg.init.base, cfg.init.amp);
        case InitKind::mms: return MmsProblem::exact_field(grid, 0.0);
        case InitKind::constant: return Field(grid, cfg.init.value);
        case InitKind::file: {
            std::ifstream in(cfg.init.file, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open initial field '" + cfg.init.file + "'");
            Snapshot snap = read_snapshot(in, cfg.domain.L, cfg.domain.origin);
            if (snap.field.grid().M != grid.M) throw std::runtime_error("initial field resolution does not match domain.M");
            return std::move(snap.field);
        }
    }
    throw std::logic_error("unhandled init kind");
}

/// Fixed step sequence for the uniform scheme: round(T/tau) equal steps when
/// T/tau is an integer to 1e-9, otherwise a shorter final step.
inline TimeMesh uniform_mesh(double T, double tau) {
    const double q = T / tau;
    const double nearest = std::round(q);
    if (nearest >= 1.0 && std::abs(q - nearest) <= 1e-9 * nearest)
        return TimeMesh::uniform(tau, static_cast<std::size_t>(nearest));
    const auto full = static_cast<std::size_t>(std::floor(q));
    std::vector<double> steps(full, tau);
    steps.push_back(T - static_cast<double>(full) * tau);
    return TimeMesh(std::move(steps));
}

/// Ratio cap r_s that fixes eta for the max-principle column.
inline double eta_ratio_for(const RunConfig& cfg, const std::optional<TimeMesh>& mesh) {
    if (cfg.eta_ratio) return *cfg.eta_ratio;
    constexpr double margin = 1e-9;
    if (cfg.time.scheme == Scheme::adaptive) {
        const double cap = cfg.adaptive.ratio_cap.value_or(kRatioLimitS0);
        return std::clamp(cap, 1.0, kRatioLimitS0 - margin);
    }
    return std::clamp(mesh ? mesh->max_ratio() : 1.0, 1.0, kRatioLimitS0 - margin);
}

namespace detail {

inline double median(std::vector<int> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::string snapshot_name(double ts) {
    std::ostringstream os;
    os << "snap_t" << ts << ".acf";
    return os.str();
}

/// Bookkeeping shared by the fixed-mesh and adaptive loops.
class RunRecorder {
public:
    RunRecorder(const RunConfig& cfg, const Grid2D& grid, double eta, RunResult& result)
        : cfg_(cfg), grid_(grid), eta_(eta), res_(result) {
        res_.summary.eta = eta;
        if (!cfg.output.dir.empty()) {
            std::filesystem::create_directories(cfg.output.dir);
            if (cfg.output.csv) {
                csv_.open(std::filesystem::path(cfg.output.dir) / "steps.csv");
                if (!csv_) throw std::runtime_error("cannot write steps.csv in " + cfg.output.dir);
                csv_ << kStepsCsvHeader << '\n';
            }
        }
        if (cfg.init.kind == InitKind::mms) {
            exact_.emplace(grid);
            res_.summary.max_error = 0.0;
        }
    }

    void start(const Field& u0) {
        StepRecord r;
        r.energy = energy(u0, cfg_.domain.eps);
        r.modified_energy = r.energy;
        r.max_norm = max_norm(u0);
        last_hat_ = r.modified_energy;
        track_norm(r.max_norm);
        emit(r);
        snapshots(u0, 0.0);
    }

    /// Registers a rejected adaptive attempt (written once the step resolves).
    void reject(std::size_t n, double t0, const AdaptiveAttempt& a) {
        StepRecord r;
        r.n = n;
        r.t = t0 + a.tau;
        r.tau = a.tau;
        r.ratio = a.ratio;
        r.e_est = a.e;
        r.accepted = false;
        r.newton_iters = a.newton_iterations;
        r.max_norm = a.max_norm;
        r.energy = a.energy;
        r.modified_energy = std::numeric_limits<double>::quiet_NaN();
        r.s0_ok = n == 1 || ratio_ok_s0(a.ratio);
        r.maxp_bound_ok = maxp_ok(a.tau, a.ratio, n);
        rejected_.push_back(r);
        ++res_.summary.rejects;
    }

    /// u_new has been accepted as u^n; `state` still holds u^{n-1}.
    void accept(std::size_t n, double tau, double ratio, double e_est, int newton_iters, const Field& u_new,
                const Field& u_old, double t_new) {
        Pending p;
        p.rec.n = n;
        p.rec.t = t_new;
        p.rec.tau = tau;
        p.rec.ratio = ratio;
        p.rec.e_est = e_est;
        p.rec.newton_iters = newton_iters;
        p.rec.max_norm = max_norm(u_new);
        p.rec.energy = energy(u_new, cfg_.domain.eps);
        p.rec.s0_ok = n == 1 || ratio_ok_s0(ratio);
        p.rec.maxp_bound_ok = maxp_ok(tau, ratio, n);
        const double h2 = grid_.h() * grid_.h();
        double s = 0.0;
        for (std::size_t k = 0; k < u_new.size(); ++k) {
            const double q = (u_new[k] - u_old[k]) / tau;
            s += q * q;
        }
        p.dq2 = h2 * s;

        const bool s1_ok = n == 1 || ratio_ok_s1(ratio);
        if (!p.rec.s0_ok) ++res_.summary.s0_violations;
        if (!s1_ok) ++res_.summary.s1_violations;
        if (!p.rec.maxp_bound_ok) ++res_.summary.max_principle_violations;

        if (pending_) finalize(ratio);
        for (const StepRecord& r : rejected_) emit(r);
        rejected_.clear();
        pending_ = p;

        res_.steps.push_back(tau);
        res_.newton_iterations.push_back(newton_iters);
        track_norm(p.rec.max_norm);
        if (exact_) {
            exact_->fill([t_new](double x, double y) { return MmsProblem::exact(x, y, t_new); });
            *res_.summary.max_error = std::max(*res_.summary.max_error, max_norm_diff(*exact_, u_new));
        }
        snapshots(u_new, t_new);

        if (!p.rec.s0_ok) enforce(cfg_.constraints.s0, "S0", n);
        if (!s1_ok) enforce(cfg_.constraints.s1, "S1", n);
        if (!p.rec.maxp_bound_ok) enforce(cfg_.constraints.max_principle, "max-principle", n);
    }

    void finish(const Field& u_final, double t_final) {
        if (pending_) finalize(0.0);
        for (const StepRecord& r : rejected_) emit(r);
        rejected_.clear();
        RunSummary& s = res_.summary;
        s.final_time = t_final;
        s.total_steps = res_.steps.size();
        s.newton_median = median(res_.newton_iterations);
        s.newton_max = res_.newton_iterations.empty()
                           ? 0
                           : *std::max_element(res_.newton_iterations.begin(), res_.newton_iterations.end());
        res_.final_field = u_final;
        if (csv_.is_open()) csv_.flush();
        if (!cfg_.output.dir.empty()) {
            std::ofstream sum(std::filesystem::path(cfg_.output.dir) / "summary.txt");
            write_summary(sum, s);
            std::ofstream mesh(std::filesystem::path(cfg_.output.dir) / "mesh.txt");
            if (!res_.steps.empty()) write_mesh(mesh, TimeMesh(res_.steps));
        }
    }

private:
    struct Pending {
        StepRecord rec;
        double dq2 = 0.0;
    };

    bool maxp_ok(double tau, double ratio, std::size_t n) const {
        if (n > 1 && !ratio_ok_s0(ratio)) return false;
        if (!eta_admissible(ratio, eta_)) return false;
        return tau <= max_principle_bound(ratio, eta_, 2.0, cfg_.domain.eps, grid_.h());
    }

    void finalize(double r_next) {
        Pending& p = *pending_;
        p.rec.modified_energy = p.rec.energy + r_next * p.rec.tau / (2.0 * (1.0 + r_next)) * p.dq2;
        RunSummary& s = res_.summary;
        if (p.rec.modified_energy > last_hat_ + 1e-10 * std::max(std::abs(last_hat_), 1e-300)) ++s.energy_increases;
        last_hat_ = p.rec.modified_energy;
        s.final_energy = p.rec.energy;
        s.final_modified_energy = p.rec.modified_energy;
        const bool law_ok = p.rec.tau <= energy_law_bound(p.rec.ratio, r_next);
        emit(p.rec);
        const std::size_t n = p.rec.n;
        pending_.reset();
        if (!law_ok) {
            ++s.energy_law_violations;
            enforce(cfg_.constraints.energy_law, "energy-law", n);
        }
    }

    void emit(const StepRecord& r) {
        res_.records.push_back(r);
        if (csv_.is_open()) write_step_row(csv_, r);
    }

    void track_norm(double m) {
        res_.summary.max_norm_overall = std::max(res_.summary.max_norm_overall, m);
        res_.summary.min_max_norm = std::min(res_.summary.min_max_norm, m);
    }

    void snapshots(const Field& u, double t) {
        const auto& times = cfg_.output.snapshot_times;
        const double slack = 1e-9 * std::max(1.0, cfg_.time.T);
        while (next_snapshot_ < times.size() && times[next_snapshot_] <= t + slack) {
            if (!cfg_.output.dir.empty()) {
                std::ofstream out(std::filesystem::path(cfg_.output.dir) / snapshot_name(times[next_snapshot_]),
                                  std::ios::binary);
                write_snapshot(out, u, t);
            }
            ++next_snapshot_;
        }
    }

    void enforce(Policy p, const char* name, std::size_t n) {
        if (p != Policy::enforce) return;
        if (csv_.is_open()) csv_.flush();
        throw ConstraintViolation(name, n);
    }

    const RunConfig& cfg_;
    Grid2D grid_;
    double eta_;
    RunResult& res_;
    std::ofstream csv_;
    std::optional<Field> exact_;
    std::optional<Pending> pending_;
    std::vector<StepRecord> rejected_;
    double last_hat_ = 0.0;
    std::size_t next_snapshot_ = 0;
};

}  // namespace detail

/// Runs one configured simulation. Writes steps.csv, summary.txt, mesh.txt and
/// snapshots into cfg.output.dir when it is set.
inline RunResult run(const RunConfig& cfg) {
    const Grid2D grid(cfg.domain.M, cfg.domain.L, cfg.domain.origin);
    const double eps = cfg.domain.eps;
    SourceFn source;
    if (cfg.init.kind == InitKind::mms) source = MmsProblem::source_fn(cfg.mms_source, grid);

    std::optional<TimeMesh> fixed;
    if (cfg.time.scheme == Scheme::uniform) fixed = uniform_mesh(cfg.time.T, cfg.time.tau);
    if (cfg.time.scheme == Scheme::random_mesh) fixed = random_mesh(cfg.time.N, cfg.time.T, cfg.time.seed);

    RunResult result;
    detail::RunRecorder rec(cfg, grid, choose_eta(eta_ratio_for(cfg, fixed)), result);
    AllenCahnStepper stepper(grid, eps, cfg.newton);
    StepperState state(make_initial_field(cfg, grid));
    rec.start(state.u_prev);

    if (fixed) {
        Field src(grid);
        while (state.n < fixed->size()) {
            const std::size_t n = state.n + 1;
            const double tau = fixed->step(n);
            const double r = fixed->ratio(n);
            if (source) evaluate_source(source, state.t + tau, src);
            StepResult step =
                stepper.solve(tau, r, state.u_prev, n >= 2 ? &*state.u_prev2 : nullptr, source ? &src : nullptr);
            rec.accept(n, tau, r, 0.0, step.newton_iterations, step.u, state.u_prev, state.t + tau);
            state.push(std::move(step.u), tau);
        }
    } else {
        AdaptiveController ctl(stepper, cfg.adaptive);
        const double T = cfg.time.T;
        double tau = cfg.time.tau_init.value_or(cfg.adaptive.tau_min);
        while (T - state.t > 1e-12 * T) {
            AdaptiveStep step = ctl.advance(state, tau, T, source);
            const std::size_t n = state.n + 1;
            for (const AdaptiveAttempt& a : step.rejected) rec.reject(n, state.t, a);
            if (step.floored) ++result.summary.floored_steps;
            rec.accept(n, step.tau, step.ratio, step.e, step.newton_iterations, step.u, state.u_prev,
                       state.t + step.tau);
            state.push(std::move(step.u), step.tau);
            tau = step.tau_next;
        }
    }
    rec.finish(state.u_prev, state.t);
    return result;
}

}  // namespace acbdf2
