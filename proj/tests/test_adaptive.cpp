#include <catch_amalgamated.hpp>

#include <cmath>

#include "acbdf2/adaptive.hpp"
#include "acbdf2/experiments.hpp"

using namespace acbdf2;
using Catch::Approx;

TEST_CASE("error estimate") {
    Grid2D g(4, 1.0);
    Field u2(g, 1.0), u1(g, 1.0 + 1e-4);
    CHECK(error_estimate(u1, u2) == Approx(1e-4).epsilon(1e-9));
    CHECK(error_estimate(u1, u2, ErrorNorm::max) == Approx(1e-4).epsilon(1e-9));
    CHECK(error_estimate(u2, u2) == 0.0);
    Field zero(g, 0.0);
    CHECK_THROWS_AS(error_estimate(u1, zero), ZeroReference);
}

TEST_CASE("step proposal") {
    AdaptiveConfig cfg;
    CHECK(tau_ada(cfg.tol, 0.01, cfg) == Approx(0.006));
    CHECK(tau_ada(cfg.tol / 4.0, 0.01, cfg) == Approx(0.012));
    CHECK(tau_ada(0.0, 0.01, cfg) == cfg.tau_max);
    CHECK(tau_ada(1e-12, 0.05, cfg) == cfg.tau_max);
    CHECK(tau_ada(1.0, 0.01, cfg) == cfg.tau_min);
    CHECK_THROWS(tau_ada(-1.0, 0.01, cfg));
}

TEST_CASE("config validation") {
    AdaptiveConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.tau_min = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.rho = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.ratio_cap = 0.5;
    CHECK_THROWS(cfg.validate());
}

namespace {

struct Trace {
    std::vector<double> taus;
    std::vector<double> ratios;
    std::size_t rejects = 0;
    std::size_t floored = 0;
};

Trace run_adaptive(const AdaptiveConfig& cfg, double T, double tau0) {
    Grid2D g(32, 2.0, -1.0);
    AllenCahnStepper st(g, 0.05);
    AdaptiveController ctl(st, cfg);
    StepperState s(four_bubble_init(g, 0.05));
    Trace tr;
    double tau = tau0;
    while (T - s.t > 1e-12 * T) {
        AdaptiveStep step = ctl.advance(s, tau, T);
        tr.taus.push_back(step.tau);
        tr.ratios.push_back(step.ratio);
        tr.rejects += step.rejected.size();
        tr.floored += step.floored;
        for (const auto& a : step.rejected) CHECK(a.e >= cfg.tol);
        if (!step.floored) CHECK(step.e < cfg.tol);
        s.push(std::move(step.u), step.tau);
        tau = step.tau_next;
    }
    CHECK(s.t == Approx(T).epsilon(1e-12));
    return tr;
}

}  // namespace

TEST_CASE("adaptive run respects step bounds and the ratio cap") {
    AdaptiveConfig cfg;
    cfg.tau_max = 0.2;
    Trace tr = run_adaptive(cfg, 3.0, cfg.tau_min);
    REQUIRE(tr.taus.size() > 5);
    for (std::size_t k = 0; k + 1 < tr.taus.size(); ++k) {
        CHECK(tr.taus[k] >= cfg.tau_min * (1 - 1e-12));
        CHECK(tr.taus[k] <= cfg.tau_max * (1 + 1e-12));
    }
    for (std::size_t k = 1; k < tr.ratios.size(); ++k) CHECK(tr.ratios[k] <= *cfg.ratio_cap * (1 + 1e-12));
    CHECK(tr.ratios[0] == 0.0);
}

TEST_CASE("adaptive run is deterministic") {
    AdaptiveConfig cfg;
    Trace a = run_adaptive(cfg, 1.0, 0.01);
    Trace b = run_adaptive(cfg, 1.0, 0.01);
    CHECK(a.taus == b.taus);
}

TEST_CASE("tight tolerance forces rejections that shrink the step") {
    AdaptiveConfig cfg;
    cfg.tol = 1e-6;
    Grid2D g(32, 2.0, -1.0);
    AllenCahnStepper st(g, 0.05);
    AdaptiveController ctl(st, cfg);
    StepperState s(four_bubble_init(g, 0.05));
    AdaptiveStep first = ctl.advance(s, 0.01, 10.0);
    s.push(std::move(first.u), first.tau);
    AdaptiveStep step = ctl.advance(s, 0.05, 10.0);
    REQUIRE_FALSE(step.rejected.empty());
    double prev = step.rejected.front().tau;
    for (std::size_t k = 1; k < step.rejected.size(); ++k) {
        CHECK(step.rejected[k].tau < prev);
        prev = step.rejected[k].tau;
    }
    CHECK(step.tau < prev);
}

TEST_CASE("tau_min floor accepts instead of looping") {
    AdaptiveConfig cfg;
    cfg.tol = 1e-12;
    cfg.tau_min = 0.01;
    cfg.tau_max = 0.1;
    Grid2D g(16, 2.0, -1.0);
    AllenCahnStepper st(g, 0.05);
    AdaptiveController ctl(st, cfg);
    StepperState s(four_bubble_init(g, 0.05));
    AdaptiveStep a = ctl.advance(s, 0.01, 1.0);
    s.push(std::move(a.u), a.tau);
    AdaptiveStep b = ctl.advance(s, 0.01, 1.0);
    CHECK(b.floored);
    CHECK(b.tau == Approx(0.01));
}

TEST_CASE("too many rejects") {
    AdaptiveConfig cfg;
    cfg.tol = 1e-12;
    cfg.tau_min = 1e-9;
    cfg.max_rejects = 0;
    Grid2D g(16, 2.0, -1.0);
    AllenCahnStepper st(g, 0.05);
    AdaptiveController ctl(st, cfg);
    StepperState s(four_bubble_init(g, 0.05));
    AdaptiveStep a = ctl.advance(s, 0.01, 1.0);
    s.push(std::move(a.u), a.tau);
    CHECK_THROWS_AS(ctl.advance(s, 0.05, 1.0), TooManyRejects);
}

TEST_CASE("final step lands on T") {
    AdaptiveConfig cfg;
    Grid2D g(8, 1.0);
    AllenCahnStepper st(g, 0.1);
    AdaptiveController ctl(st, cfg);
    StepperState s(coarsening_init(g, 1));
    s.t = 0.995;
    AdaptiveStep a = ctl.advance(s, 0.05, 1.0);
    CHECK(a.tau == Approx(0.005));
}
