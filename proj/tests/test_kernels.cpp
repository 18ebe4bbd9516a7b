#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "acbdf2/kernels.hpp"

using namespace acbdf2;
using Catch::Approx;

namespace {

TimeMesh random_ratio_mesh(std::mt19937_64& gen, std::size_t N) {
    std::uniform_real_distribution<double> r(0.05, kRatioLimitS0 - 1e-6);
    std::uniform_real_distribution<double> t0(0.01, 1.0);
    std::vector<double> steps{t0(gen)};
    for (std::size_t k = 1; k < N; ++k) steps.push_back(steps.back() * r(gen));
    return TimeMesh(steps);
}

// Three-point Lagrange derivative at t_n: an independent oracle for D2 on a sequence.
double lagrange_derivative(double t0, double t1, double t2, double v0, double v1, double v2) {
    const double l0 = (t2 - t1) / ((t0 - t1) * (t0 - t2));
    const double l1 = (t2 - t0) / ((t1 - t0) * (t1 - t2));
    const double l2 = 1.0 / (t2 - t0) + 1.0 / (t2 - t1);
    return l0 * v0 + l1 * v1 + l2 * v2;
}

}  // namespace

TEST_CASE("BDF2 kernel values") {
    auto u = bdf2_kernel(0.1, 1.0);
    CHECK(u.b0 == Approx(15.0));
    CHECK(u.b1 == Approx(-5.0));

    TimeMesh m({0.1, 0.3});
    auto b = bdf2_kernels(m, 2);
    CHECK(b.b0 == Approx(7.0 / 1.2));
    CHECK(b.b1 == Approx(-7.5));

    TimeMesh first({0.25});
    auto b1 = bdf2_kernels(first, 1);
    CHECK(b1.b0 == 4.0);
    CHECK(b1.b1 == 0.0);
}

TEST_CASE("choose_eta") {
    CHECK(choose_eta(1.0) == 0.5);
    CHECK(choose_eta(2.0) == Approx(8.0 / 9.0));
    CHECK(choose_eta(kRatioLimitS0 - 1e-9) < 1.0);
    CHECK(choose_eta(kRatioLimitS0 - 1e-9) == Approx(1.0).margin(1e-8));
    CHECK_THROWS_AS(choose_eta(0.9), std::domain_error);
    CHECK_THROWS_AS(choose_eta(kRatioLimitS0), std::domain_error);
    for (double rs = 1.0; rs < kRatioLimitS0; rs += 0.01) {
        const double eta = choose_eta(rs);
        CHECK(eta_admissible(rs, eta));
        CHECK(eta_admissible(0.5 * rs, eta));
    }
}

TEST_CASE("recombined kernels") {
    auto d = recombined_kernels(bdf2_kernel(1.0, 1.0), 0.5, 3);
    REQUIRE(d.size() == 4);
    CHECK(d[0] == 1.5);
    CHECK(d[1] == 0.25);
    CHECK(d[2] == 0.125);
    CHECK(d[3] == 0.0625);
    CHECK(is_nonnegative_decreasing(d));

    const double r = 1.8;
    auto z = recombined_kernels(bdf2_kernel(0.3, r), eta_lower_bound(r), 5);
    for (std::size_t j = 1; j < z.size(); ++j) CHECK(z[j] == Approx(0.0).margin(1e-14));
}

TEST_CASE("recombined kernels are nonnegative and decreasing for admissible ratios") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> rs_d(1.0, kRatioLimitS0 - 1e-9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> tau_d(1e-4, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const double rs = rs_d(gen);
        const double r = rs * u(gen);
        const auto d = recombined_kernels(bdf2_kernel(tau_d(gen), r), choose_eta(rs), 10);
        REQUIRE(is_nonnegative_decreasing(d));
    }
}

TEST_CASE("apply_bdf2 is exact on linear and quadratic sequences") {
    TimeMesh m({0.1, 0.3});
    const auto t = m.times();
    std::vector<double> lin{t[0], t[1], t[2]};
    std::vector<double> quad{t[0] * t[0], t[1] * t[1], t[2] * t[2]};
    CHECK(apply_bdf2(m, lin, 2) == Approx(1.0).epsilon(1e-14));
    CHECK(apply_bdf2(m, quad, 2) == Approx(2.0 * t[2]).epsilon(1e-14));
    std::vector<double> c{3.0, 3.0, 3.0};
    CHECK(apply_bdf2(m, c, 2) == 0.0);

    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 50; ++trial) {
        TimeMesh rm = random_ratio_mesh(gen, 8);
        const auto tt = rm.times();
        std::vector<double> v(tt.size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::sin(3.0 * tt[k]);
        for (std::size_t n = 2; n <= rm.size(); ++n) {
            const double oracle = lagrange_derivative(tt[n - 2], tt[n - 1], tt[n], v[n - 2], v[n - 1], v[n]);
            CHECK(apply_bdf2(rm, v, n) == Approx(oracle).epsilon(1e-9).margin(1e-9));
        }
    }
}

TEST_CASE("apply_bdf2 on fields") {
    const Bdf2Kernel b = bdf2_kernel(0.2, 1.5);
    std::vector<double> a{1.0, 2.0}, p{0.5, 1.0}, q{0.0, 0.25}, out(2);
    apply_bdf2(b, a, p, q, out);
    for (std::size_t i = 0; i < 2; ++i) CHECK(out[i] == apply_bdf2(b, a[i], p[i], q[i]));
    std::vector<double> empty;
    CHECK_THROWS_AS(apply_bdf2(b, a, p, empty, out), std::invalid_argument);
    apply_bdf2(Bdf2Kernel{5.0, 0.0}, a, p, empty, out);
    CHECK(out[0] == 2.5);
}

TEST_CASE("recombined form reproduces the direct quotient") {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 100; ++trial) {
        TimeMesh m = random_ratio_mesh(gen, 12);
        const double eta = choose_eta(std::max(1.0, m.max_ratio()));
        std::vector<double> v(m.size() + 1);
        for (double& x : v) x = nd(gen);
        const auto vbar = recombine_sequence(v, eta);
        const auto back = substitute_back(vbar, eta);
        for (std::size_t k = 0; k < v.size(); ++k) REQUIRE(back[k] == Approx(v[k]).margin(1e-12));
        for (std::size_t n = 1; n <= m.size(); ++n) {
            const double direct = apply_bdf2(m, v, n);
            const double recomb = apply_recombined(m, eta, vbar, n);
            REQUIRE(std::abs(direct - recomb) <= 1e-12 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("complementary kernels") {
    SECTION("uniform hand values") {
        TimeMesh m = TimeMesh::uniform(1.0, 2);
        ComplementaryKernels ck(m, 0.5);
        CHECK(ck.q(1, 1) == Approx(1.0 / ck.d(1, 0)));
        CHECK(ck.q(2, 2) == Approx(2.0 / 3.0));
        CHECK(ck.q(2, 1) == Approx(5.0 / 6.0));
        CHECK(ck.q(2, 1) * ck.d(1, 0) + ck.q(2, 2) * ck.d(2, 1) == Approx(1.0));
    }
    SECTION("identity by brute-force summation on random meshes") {
        std::mt19937_64 gen(99);
        const double eps = std::numeric_limits<double>::epsilon();
        for (int trial = 0; trial < 50; ++trial) {
            TimeMesh m = random_ratio_mesh(gen, 8);
            const double eta = choose_eta(std::max(1.0, m.max_ratio()));
            ComplementaryKernels ck(m, eta);
            for (std::size_t n = 1; n <= 8; ++n)
                for (std::size_t k = 1; k <= n; ++k) {
                    double sum = 0.0;
                    for (std::size_t j = k; j <= n; ++j) sum += ck.q(n, j) * ck.d(j, j - k);
                    REQUIRE(std::abs(sum - 1.0) <= 10.0 * n * eps);
                }
        }
    }
    SECTION("index checks") {
        ComplementaryKernels ck(TimeMesh::uniform(0.1, 3), 0.5);
        CHECK_THROWS_AS(ck.q(2, 3), std::out_of_range);
        CHECK_THROWS_AS(ck.q(2, 0), std::out_of_range);
    }
}
