#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "acbdf2/experiments.hpp"

using namespace acbdf2;
using Catch::Approx;

TEST_CASE("manufactured source closes the equation") {
    // Check g = u_t - eps^2 Delta u + u^3 - u against the exact solution with
    // a central finite-difference Laplacian and time derivative.
    const double e2 = MmsProblem::eps() * MmsProblem::eps();
    CHECK(e2 == Approx(1.0 / (8.0 * std::numbers::pi * std::numbers::pi)));
    const double d = 1e-4;
    for (double x : {0.1, 0.37, 0.8}) {
        for (double y : {0.05, 0.5, 0.71}) {
            const double t = 0.6;
            auto u = [&](double xx, double yy, double tt) { return MmsProblem::exact(xx, yy, tt); };
            const double ut = (u(x, y, t + d) - u(x, y, t - d)) / (2 * d);
            const double lap = (u(x + d, y, t) + u(x - d, y, t) + u(x, y + d, t) + u(x, y - d, t) - 4 * u(x, y, t)) / (d * d);
            const double v = u(x, y, t);
            CHECK(MmsProblem::source(x, y, t) == Approx(ut - e2 * lap + v * v * v - v).margin(1e-5));
        }
    }
}

TEST_CASE("grid-consistent source closes the semi-discrete equation") {
    const Grid2D g(16, 1.0);
    const double t = 0.4, d = 1e-5;
    Field u = MmsProblem::exact_field(g, t);
    Field lap = laplacian_apply(u);
    const double e2 = MmsProblem::eps() * MmsProblem::eps();
    for (std::size_t j = 0; j < g.M; ++j)
        for (std::size_t i = 0; i < g.M; ++i) {
            const double x = g.coord(i), y = g.coord(j);
            const double ut = (MmsProblem::exact(x, y, t + d) - MmsProblem::exact(x, y, t - d)) / (2 * d);
            const double v = u.at(i, j);
            const double lhs = ut - e2 * lap.at(i, j) + v * v * v - v;
            REQUIRE(MmsProblem::grid_source(x, y, t, g.h()) == Approx(lhs).margin(1e-8));
        }
}

TEST_CASE("random mesh") {
    TimeMesh m = random_mesh(50, 1.0, 7);
    CHECK(m.size() == 50);
    CHECK(std::abs(m.final_time() - 1.0) <= 2e-16);
    TimeMesh again = random_mesh(50, 1.0, 7);
    for (std::size_t k = 1; k <= 50; ++k) CHECK(m.step(k) == again.step(k));
    TimeMesh other = random_mesh(50, 1.0, 8);
    bool differ = false;
    for (std::size_t k = 1; k <= 50; ++k) differ |= m.step(k) != other.step(k);
    CHECK(differ);

    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        TimeMesh r = random_mesh(17, 3.0, seed);
        REQUIRE(std::abs(r.final_time() - 3.0) <= 4.0 * std::numeric_limits<double>::epsilon() * 3.0);
    }
    CHECK_THROWS(random_mesh(0, 1.0, 1));

    std::vector<double> w(8, 0.25);
    TimeMesh u = mesh_from_weights(w, 2.0);
    for (std::size_t k = 1; k <= 8; ++k) CHECK(u.step(k) == Approx(0.25));
}

TEST_CASE("ratio violation count") {
    TimeMesh m({1.0, 3.0, 1.0, 2.0, 5.0});
    CHECK(count_ratios_at_least(m, kRatioLimitS0) == 2);
}

TEST_CASE("convergence order") {
    CHECK(*convergence_order(4e-3, 1e-3, 0.2, 0.1) == Approx(2.0));
    CHECK_FALSE(convergence_order(0.0, 1e-3, 0.2, 0.1));
    CHECK_FALSE(convergence_order(1e-3, 0.0, 0.2, 0.1));
}

TEST_CASE("small MMS sweep converges at second order") {
    const std::vector<std::size_t> Ns{20, 40, 80};
    auto rows = convergence_table(Ns, 5, 32, MmsSource::grid_consistent);
    REQUIRE(rows.size() == 3);
    CHECK_FALSE(rows[0].order);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        REQUIRE(rows[k].order);
        CHECK(*rows[k].order > 1.5);
        CHECK(*rows[k].order < 2.6);
        CHECK(rows[k].err_inf < rows[k - 1].err_inf);
    }
}

TEST_CASE("initial conditions") {
    Grid2D g(64, 2.0, -1.0);
    Field f = four_bubble_init(g, 0.02);
    CHECK(f.at(32, 32) == Approx(-std::pow(std::tanh(2.5), 4)).epsilon(1e-14));
    CHECK(-std::pow(std::tanh(2.5), 4) == Approx(-0.9475227).epsilon(1e-6));
    CHECK(max_norm(f) <= 1.0);
    for (std::size_t j = 1; j < g.M; ++j)
        for (std::size_t i = 1; i < g.M; ++i) REQUIRE(f.at(i, j) == Approx(f.at(g.M - i, g.M - j)).epsilon(1e-14));

    Grid2D c(32, 1.0);
    Field a = coarsening_init(c, 9, 0.0, 0.05);
    Field b = coarsening_init(c, 9, 0.0, 0.05);
    for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(a[k] == b[k]);
    CHECK(max_norm(a) <= 0.05);
    Field flat = coarsening_init(c, 9, 0.3, 0.0);
    CHECK(max_norm_diff(flat, Field(c, 0.3)) == 0.0);
    Field lit = coarsening_init(c, 9, 0.95, 0.05);
    CHECK(max_norm(lit) <= 1.0);
}
