#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "hmfg/models.hpp"
#include "hmfg/simulate.hpp"

using namespace hmfg;

namespace {

Point bundle_mean(const PathBundle& b, std::size_t n) {
    Point s(b.state(0, n).size());
    for (std::size_t p = 0; p < b.n_paths; ++p) s += b.state(p, n);
    return s * (1.0 / static_cast<double>(b.n_paths));
}

Point bundle_var(const PathBundle& b, std::size_t n) {
    const Point mu = bundle_mean(b, n);
    Point v(mu.size());
    for (std::size_t p = 0; p < b.n_paths; ++p)
        for (std::size_t i = 0; i < mu.size(); ++i) v[i] += std::pow(b.state(p, n)[i] - mu[i], 2);
    return v * (1.0 / static_cast<double>(b.n_paths));
}

ControlPolicy lq_analytic_policy(const LqParams& p) {
    return [p](double t, const Point& x, const EmpiricalMeasure& m) {
        return Point{(p.q + riccati_closed_form(p, std::min(t, p.T))) * (m.mean()[0] - x[0])};
    };
}

}  // namespace

TEST_CASE("sde: frozen dynamics keeps the initial draw") {
    auto pr = testing::constant_coefficients(0.0, 0.0);
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto b = simulate_sde(pr, constant_policy(Point{0.0}), testing::frozen_path(Point{0.5}, 100), steps,
                          SdeOptions{50, 3});
    for (std::size_t p = 0; p < 50; ++p)
        for (std::size_t n = 0; n <= 100; ++n) CHECK(b.state(p, n) == b.state(p, 0));
}

TEST_CASE("sde: zero diffusion is explicit Euler") {
    MfgProblem pr = testing::constant_coefficients(0.0, 0.0);
    pr.bounded = false;
    pr.drift = [](double t, const Point& x, const EmpiricalMeasure&, const Point& a) {
        return Point{-x[0] + a[0] + t};
    };
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto b = simulate_sde(pr, constant_policy(Point{0.3}), testing::frozen_path(Point{0.5}, 100), steps,
                          SdeOptions{4, 5});
    for (std::size_t p = 0; p < 4; ++p) {
        double x = b.state(p, 0)[0];
        for (std::size_t n = 0; n < 100; ++n) {
            x = x + (-x + 0.3 + steps.time(n)) * 0.01;
            CHECK(b.state(p, n + 1)[0] == x);
        }
    }
}

TEST_CASE("sde: lq mean reversion with zero control") {
    LqParams p;
    p.rho = 0.0;
    auto pr = lq_problem(p);
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto b = simulate_sde(pr, constant_policy(Point{0.0}), testing::frozen_path(Point{0.5}, 100), steps,
                          SdeOptions{10000, 17});
    const double mean = bundle_mean(b, 100)[0];
    const double se = std::sqrt(bundle_var(b, 100)[0] / 10000.0);
    CHECK(std::abs(mean - 0.5) <= 3.0 * se);
}

TEST_CASE("sde: shared common noise") {
    LqParams p;
    auto pr = lq_problem(p);
    pr.sample_initial = [](Rng&) { return Point{0.5}; };
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto b = simulate_sde(pr, constant_policy(Point{0.0}), {}, steps, SdeOptions{3, 21, true, true});
    REQUIRE(b.common_noise.size() == 101);
    CHECK(b.common_noise == common_noise_path(21, steps));
    CHECK(b.state(0, 50) != b.state(1, 50));

    // with rho = 1 every path sees only the shared increments
    LqParams all = p;
    all.rho = 1.0;
    auto pr1 = lq_problem(all);
    pr1.sample_initial = [](Rng&) { return Point{0.5}; };
    auto c = simulate_sde(pr1, constant_policy(Point{0.0}), {}, steps, SdeOptions{3, 21, true, true});
    for (std::size_t n = 0; n <= 100; ++n) {
        CHECK(c.state(0, n) == c.state(1, n));
        CHECK(c.state(0, n)[0] == doctest::Approx(0.5 + c.common_noise[n]).epsilon(1e-12));
    }
}

TEST_CASE("sde and chain are reproducible") {
    auto pr = mfg2d_problem();
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto lat = build_lattice(pr, steps);
    auto m = testing::frozen_path(Point{0.4, 0.6}, 100);
    auto pol = constant_policy(Point{0.8, 0.8});
    auto a = simulate_sde(pr, pol, m, steps, SdeOptions{200, 4});
    auto b = simulate_sde(pr, pol, m, steps, SdeOptions{200, 4});
    CHECK(a.states == b.states);
    auto c = simulate_chain(pr, lat, steps, pol, m, 200, 4);
    auto d = simulate_chain(pr, lat, steps, pol, m, 200, 4);
    CHECK(c.states == d.states);
    auto e = simulate_chain(pr, lat, steps, pol, m, 200, 5);
    CHECK(c.states != e.states);
}

TEST_CASE("chain: deterministic rows give a unique path") {
    MfgProblem pr = testing::constant_coefficients(20.0, 0.0);
    pr.domain = Box{Point{0.0}, Point{4.0}};
    pr.sample_initial = [](Rng& rng) { return Point{rng.uniform(0.0, 0.09)}; };
    auto steps = StepSizes::make(0.1, 0.2, 0.01);
    pr.horizon = 0.1;
    auto lat = build_lattice(pr, steps);
    auto b = simulate_chain(pr, lat, steps, constant_policy(Point{0.0}), testing::frozen_path(Point{0.0}, 10), 20, 1);
    for (std::size_t p = 0; p < 20; ++p)
        for (std::size_t n = 0; n <= 10; ++n) CHECK(b.state(p, n)[0] == doctest::Approx(0.2 * double(n)));
}

TEST_CASE("chain: diffusion variance") {
    MfgProblem pr = testing::constant_coefficients(0.0, 0.5);
    pr.domain = Box{Point{-3.0}, Point{3.0}};
    pr.sample_initial = [](Rng&) { return Point{0.0}; };
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto lat = build_lattice(pr, steps);
    ChainStats stats;
    auto b = simulate_chain(pr, lat, steps, constant_policy(Point{0.0}), testing::frozen_path(Point{0.0}, 100),
                            10000, 2, &stats);
    const double var = bundle_var(b, 100)[0];
    // SE of a sample variance of a near-Gaussian: sqrt(2 / n) sigma^2 T
    CHECK(std::abs(var - 0.25) <= 3.0 * std::sqrt(2.0 / 10000.0) * 0.25);
    CHECK(stats.clamped_fraction < 1e-4);
}

TEST_CASE("chain and sde statistics agree on the 2-D model") {
    auto pr = mfg2d_problem();
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto lat = build_lattice(pr, steps);
    auto m = testing::frozen_path(Point{0.4, 0.6}, 100);
    auto pol = constant_policy(Point{0.75, 0.75});
    auto sde = simulate_sde(pr, pol, m, steps, SdeOptions{10000, 6});
    auto chain = simulate_chain(pr, lat, steps, pol, m, 10000, 6);
    for (std::size_t n = 0; n <= 100; n += 10)
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(std::abs(bundle_mean(sde, n)[i] - bundle_mean(chain, n)[i]) <= 2.0 * 0.2);
    for (std::size_t i = 0; i < 2; ++i) {
        const double vs = bundle_var(sde, 100)[i], vc = bundle_var(chain, 100)[i];
        CHECK(std::abs(vs - vc) <= 0.2 * vs);
    }
}

TEST_CASE("estimate_cost") {
    auto pr = testing::constant_coefficients(0.0, 0.5);
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto m = testing::frozen_path(Point{0.5}, 100);
    auto b = simulate_sde(pr, constant_policy(Point{0.0}), m, steps, SdeOptions{100, 3});
    pr.running_cost = [](double, const Point&, const EmpiricalMeasure&, const Point&) { return 0.0; };
    pr.terminal_cost = [](const Point&, const EmpiricalMeasure&) { return 1.0; };
    auto e = estimate_cost(pr, b, m, steps);
    CHECK(e.mean == 1.0);
    CHECK(e.standard_error == 0.0);
    pr.running_cost = [](double, const Point&, const EmpiricalMeasure&, const Point&) { return 1.0; };
    pr.terminal_cost = [](const Point&, const EmpiricalMeasure&) { return 0.0; };
    e = estimate_cost(pr, b, m, steps);
    CHECK(e.mean == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(e.standard_error == 0.0);
}

TEST_CASE("estimate_cost: lq analytic control attains the analytic value") {
    LqParams p;
    auto pr = lq_problem(p);
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto w0 = common_noise_path(77, steps);
    LqEquilibrium eq(p, w0, 0.01);
    MeasurePath m;
    for (std::size_t n = 0; n <= 100; ++n) m.push_back(EmpiricalMeasure::dirac(Point{eq.mean_field(n)}));
    auto b = simulate_sde(pr, lq_analytic_policy(p), m, steps, SdeOptions{20000, 77});
    auto e = estimate_cost(pr, b, m, steps);
    // E over X0 ~ U(0, 1) of v(0, X0 - 1/2): eta_0 / 2 * Var(U) + integral term
    const double expect = 0.5 * eq.eta(0.0) / 12.0 + 0.5 * (1.0 - p.rho * p.rho) * eq.eta_integral(0.0);
    CHECK(std::abs(e.mean - expect) <= 3.0 * e.standard_error);
}

TEST_CASE("induced measure") {
    {
        auto pr = testing::constant_coefficients(0.0, 0.0);
        pr.sample_initial = [](Rng&) { return Point{0.4}; };
        auto steps = StepSizes::make(1.0, 0.2, 0.01);
        auto lat = build_lattice(pr, steps);
        auto path = induced_measure(pr, lat, steps, constant_policy(Point{0.0}), testing::frozen_path(Point{0.0}, 100), 100, 1);
        for (const auto& m : path) {
            CHECK(m.size() == 1);
            CHECK(m.particles()[0][0] == doctest::Approx(0.4));
        }
    }
    {
        MfgProblem pr = testing::constant_coefficients(1.0, 0.0);
        pr.domain = Box{Point{0.0}, Point{2.0}};
        pr.sample_initial = [](Rng&) { return Point{0.2}; };
        auto steps = StepSizes::make(1.0, 0.05, 0.01);
        auto lat = build_lattice(pr, steps);
        auto path = induced_measure(pr, lat, steps, constant_policy(Point{0.0}), testing::frozen_path(Point{0.0}, 100), 2000, 1);
        for (std::size_t n = 0; n <= 100; n += 10)
            CHECK(std::abs(path[n].mean()[0] - (0.2 + steps.time(n))) <= 2.0 * 0.05);
    }
    {
        LqParams p;
        p.rho = 0.0;
        auto pr = lq_problem(p);
        auto steps = StepSizes::make(1.0, 0.125, 0.01);
        auto lat = build_lattice(pr, steps);
        const std::size_t n = 10000;
        auto path = induced_measure(pr, lat, steps, lq_analytic_policy(p), testing::frozen_path(Point{0.5}, 100), n, 3);
        CHECK(std::abs(path.back().mean()[0] - 0.5) <= 3.0 * p.sigma / std::sqrt(double(n)));
    }
}
