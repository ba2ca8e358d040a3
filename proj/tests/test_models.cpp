#include <cmath>

#include "doctest.h"
#include "hmfg/error.hpp"
#include "hmfg/models.hpp"
#include "hmfg/rng.hpp"

using namespace hmfg;

TEST_CASE("lq costs") {
    LqParams p;
    auto pr = lq_problem(p);
    pr.validate();
    auto at = [](double u) { return EmpiricalMeasure::dirac(Point{u}); };
    CHECK(pr.running_cost(0.0, Point{0.3}, at(0.3), Point{0.7}) == doctest::Approx(0.245).epsilon(1e-14));
    CHECK(pr.running_cost(0.0, Point{0.0}, at(1.0), Point{0.0}) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(pr.terminal_cost(Point{-1.0}, at(1.0)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pr.drift(0.0, Point{0.0}, at(1.0), Point{0.5})[0] == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(pr.policy_coordinates(Point{0.2}, at(0.5))[0] == doctest::Approx(-0.3));

    LqParams bad = p;
    bad.epsilon = 0.01;
    CHECK_THROWS_AS(lq_problem(bad), Error);
    bad = p;
    bad.rho = 1.5;
    CHECK_THROWS_AS(lq_problem(bad), Error);
    bad = p;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(lq_problem(bad), Error);
}

TEST_CASE("riccati closed form") {
    LqParams p;
    CHECK(riccati_closed_form(p, 1.0) == 0.5);
    const double r = 0.2 * 0.2 + (0.5 - 0.01);
    CHECK(r == doctest::Approx(0.53).epsilon(1e-15));
    CHECK_THROWS_AS(riccati_closed_form(p, 1.1), Error);
    CHECK_THROWS_AS(riccati_closed_form(p, -0.1), Error);
    for (double t = 0.05; t < 0.96; t += 0.05) {
        const double h = 1e-5;
        const double deriv = (riccati_closed_form(p, t + h) - riccati_closed_form(p, t - h)) / (2 * h);
        const double eta = riccati_closed_form(p, t);
        CHECK(std::abs(deriv - (2 * (p.a + p.q) * eta + eta * eta - (p.epsilon - p.q * p.q))) <= 1e-8);
    }
}

TEST_CASE("riccati ode vs closed form") {
    LqParams p;
    auto table = riccati_ode_solve(p, 10000);
    CHECK(table.eta.back() == 0.5);
    double gap = 0.0;
    for (std::size_t i = 0; i < table.t.size(); ++i)
        gap = std::max(gap, std::abs(table.eta[i] - riccati_closed_form(p, table.t[i])));
    CHECK(gap <= 1e-6);
    CHECK_THROWS_AS(riccati_ode_solve(p, 5), Error);

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        LqParams r;
        r.a = rng.uniform(-0.5, 1.0);
        r.q = rng.uniform(0.0, 1.0);
        r.epsilon = r.q * r.q + rng.uniform(0.01, 2.0);
        r.c = rng.uniform(0.0, 2.0);
        r.T = rng.uniform(0.5, 2.0);
        auto tab = riccati_ode_solve(r, 10000);
        double g = 0.0;
        for (std::size_t i = 0; i < tab.t.size(); ++i)
            g = std::max(g, std::abs(tab.eta[i] - riccati_closed_form(r, tab.t[i])));
        CHECK(g <= 1e-6);
    }
}

TEST_CASE("riccati degenerate epsilon = q^2") {
    LqParams p;
    p.epsilon = p.q * p.q;
    auto tab = riccati_ode_solve(p, 1000);
    for (std::size_t i = 0; i + 1 < tab.eta.size(); ++i) {
        CHECK(tab.eta[i] > 0.0);
        CHECK(tab.eta[i] < tab.eta[i + 1]);  // eta' > 0, so eta shrinks going backward
    }
}

TEST_CASE("lq analytic equilibrium") {
    LqParams p;
    p.rho = 0.0;
    std::vector<double> w0(101);
    for (std::size_t n = 0; n < w0.size(); ++n) w0[n] = std::sin(double(n));
    LqEquilibrium eq(p, w0, 0.01);
    for (std::size_t n = 0; n <= 100; ++n) CHECK(eq.mean_field(n) == 0.5);
    CHECK(eq.control(30, eq.mean_field(30)) == 0.0);
    CHECK(eq.value(1.0, 2.0) == doctest::Approx(0.5 * 0.5 * 4.0).epsilon(1e-14));

    LqParams q;
    LqEquilibrium eq2(q, w0, 0.01);
    CHECK(eq2.mean_field(10) == doctest::Approx(0.5 + 0.2 * std::sin(10.0)));
    // Simpson against the trapezoid on a finer grid
    double trap = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double t0 = 0.3 + 0.7 * i / n, t1 = 0.3 + 0.7 * (i + 1) / n;
        trap += 0.5 * (riccati_closed_form(q, t0) + riccati_closed_form(q, std::min(1.0, t1))) * (t1 - t0);
    }
    CHECK(eq2.eta_integral(0.3) == doctest::Approx(trap).epsilon(1e-9));
}

TEST_CASE("mfg2d formulas") {
    auto pr = mfg2d_problem();
    pr.validate();
    auto m = EmpiricalMeasure::dirac(Point{0.4, 0.4});
    CHECK(pr.running_cost(0.0, Point{0.5, 0.5}, m, Point{1.0, 1.0}) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(pr.terminal_cost(Point{0.5, 0.5}, m) == doctest::Approx(0.0).epsilon(1e-14));
    auto b = pr.drift(0.0, Point{0.4, 0.4}, m, Point{0.8, 0.8});
    CHECK(std::abs(b[0]) <= 1e-15);
    CHECK(std::abs(b[1]) <= 1e-15);
    CHECK(pr.diffusion(0.0, Point{0.1, 0.2})(0, 0) == 0.5);
    CHECK(pr.diffusion(0.0, Point{0.1, 0.2})(0, 1) == 0.0);

    Rng rng(8);
    for (int i = 0; i < 100000; ++i) {
        const Point x{rng.uniform(), rng.uniform()};
        const Point u{rng.uniform(), rng.uniform()};
        const Point a{rng.uniform(0.0, 1.5), rng.uniform(0.0, 1.5)};
        const auto mu = EmpiricalMeasure::dirac(u);
        const double e0 = 4 * x[0] - 5 * u[0], e1 = 4 * x[1] - 5 * u[1];
        const double g = e0 * e0 + e1 * e1;
        REQUIRE(pr.terminal_cost(x, mu) == g);
        REQUIRE(pr.running_cost(0.3, x, mu, a) == doctest::Approx(g + a[0] * a[0] + a[1] * a[1]).epsilon(1e-14));
        const Point bb = pr.drift(0.3, x, mu, a);
        REQUIRE(bb[0] == 2 * x[0] - a[0]);
        REQUIRE(bb[1] == 2 * x[1] - a[1]);
    }
}

TEST_CASE("mfg2d initial law is truncated to Q") {
    auto pr = mfg2d_problem();
    Rng rng(9);
    double m0 = 0.0, m1 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Point x = pr.sample_initial(rng);
        REQUIRE(pr.domain.contains(x));
        m0 += x[0] / n;
        m1 += x[1] / n;
    }
    // truncated N(0, 0.25) on [0, 1]: mean = 0.5 (phi(0) - phi(2)) / (Phi(2) - Phi(0)) = 0.3498
    CHECK(m0 == doctest::Approx(0.3498).epsilon(0.02));
    CHECK(m1 == doctest::Approx(1.0 - 0.3498).epsilon(0.02));
}

TEST_CASE("terminal value equals g") {
    LqParams p;
    LqEquilibrium eq(p, std::vector<double>(101, 0.0), 0.01);
    auto pr = lq_problem(p);
    for (double x : {-1.0, 0.0, 0.5, 2.0})
        CHECK(eq.value(1.0, x - 0.5) == doctest::Approx(pr.terminal_cost(Point{x}, EmpiricalMeasure::dirac(Point{0.5}))).epsilon(1e-14));
}
