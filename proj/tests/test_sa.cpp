#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "hmfg/error.hpp"
#include "hmfg/models.hpp"
#include "hmfg/rng.hpp"
#include "hmfg/sa.hpp"

using namespace hmfg;

namespace {

const ParameterVector kTarget{0.3, -0.2, 0.5, 0.1, -0.4};

double quadratic(const ParameterVector& theta) {
    double s = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) s += (theta[j] - kTarget[j]) * (theta[j] - kTarget[j]);
    return -s;
}

ParameterVector unit_offset_start() {
    ParameterVector start = kTarget;
    start[0] += 1.0;  // |theta_0 - theta*| = 1
    return start;
}

double max_error(const ParameterVector& theta) {
    double e = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) e = std::max(e, std::abs(theta[j] - kTarget[j]));
    return e;
}

}  // namespace

TEST_CASE("schedule conditions") {
    SaSchedule s;
    CHECK_NOTHROW(s.validate());
    CHECK(s.eps(0) == 0.5);
    CHECK(s.delta(15) == doctest::Approx(0.25));
    SaSchedule bad = s;
    bad.p_delta = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.p_delta = 0.5;  // 2 (1 - 0.5) = 1
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.p_eps = 1.2;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.eps0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("kw_step: interior updates are not projected") {
    SaSchedule s;
    ProjectionRegion region(10.0);
    auto res = kw_step(ParameterVector{0.0, 0.0, 0.0, 0.0, 0.0}, s, region,
                       [](const ParameterVector& th, std::uint64_t) { return quadratic(th); }, 3, 1);
    CHECK_FALSE(res.projected);
    for (double z : res.projection) CHECK(std::abs(z) <= 1e-12);
}

TEST_CASE("kw_step: outward gradient at a face stays on the face") {
    SaSchedule s;
    ProjectionRegion region(1.0);
    auto G = [](const ParameterVector& th, std::uint64_t) { return 3.0 * th[0] - th[1] * th[1]; };
    auto res = kw_step(ParameterVector{1.0, 0.0}, s, region, G, 0, 1);
    CHECK(res.theta[0] == 1.0);
    CHECK(res.projected);
    CHECK(res.projection[0] < 0.0);  // points back inside
    CHECK(res.projection[1] == 0.0);
    CHECK(region.clamp(region.clamp(ParameterVector{3.0, -4.0})) == region.clamp(ParameterVector{3.0, -4.0}));
}

TEST_CASE("kw_step: finite differences match the gradient to O(delta^2)") {
    SaSchedule s;
    ProjectionRegion region(10.0);
    auto G = [](const ParameterVector& th, std::uint64_t) {
        double v = quadratic(th);
        for (std::size_t j = 0; j < th.size(); ++j) v -= 0.1 * std::pow(th[j] - kTarget[j], 4);
        return v;
    };
    Rng rng(1);
    for (std::size_t l : {0u, 10u, 100u}) {
        ParameterVector th(5);
        for (auto& v : th) v = rng.uniform(-0.5, 0.5);
        auto res = kw_step(th, s, region, G, l, 1);
        for (std::size_t j = 0; j < 5; ++j) {
            const double d = th[j] - kTarget[j];
            const double exact = -2.0 * d - 0.4 * d * d * d;
            CHECK(std::abs(res.gradient[j] - exact) <= 10.0 * res.delta * res.delta);
        }
    }
}

TEST_CASE("kw_step: non-finite evaluations are reported") {
    SaSchedule s;
    auto G = [](const ParameterVector&, std::uint64_t) { return std::nan(""); };
    try {
        kw_step(ParameterVector{0.0}, s, ProjectionRegion(1.0), G, 0, 1);
        FAIL("expected NonFiniteEvaluation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteEvaluation);
    }
}

TEST_CASE("train: noiseless quadratic") {
    SaSchedule s;
    auto res = train(unit_offset_start(), s, ProjectionRegion(10.0),
                     [](const ParameterVector& th, std::uint64_t) { return quadratic(th); }, 1);
    CHECK(res.steps <= 5000);
    CHECK(max_error(res.theta) <= 1e-2);
}

TEST_CASE("train: flat objective returns the initial parameters") {
    SaSchedule s;
    ParameterVector init{0.1, 0.2};
    auto res = train(init, s, ProjectionRegion(10.0), [](const ParameterVector&, std::uint64_t) { return 2.0; }, 1);
    CHECK(res.theta == init);
    CHECK(res.steps == 1);
}

TEST_CASE("train: seeded runs are identical") {
    SaSchedule s;
    s.max_steps = 200;
    auto G = [](const ParameterVector& th, std::uint64_t seed) {
        Rng rng(seed ^ std::hash<double>{}(th[0] + 3.0 * th[1]));
        return quadratic(th) + 0.01 * rng.normal();
    };
    auto a = train(unit_offset_start(), s, ProjectionRegion(10.0), G, 42);
    auto b = train(unit_offset_start(), s, ProjectionRegion(10.0), G, 42);
    CHECK(a.theta == b.theta);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) CHECK(a.trace[k].G == b.trace[k].G);
}

TEST_CASE("train rejects a start outside H") {
    SaSchedule s;
    CHECK_THROWS_AS(train(ParameterVector{20.0}, s, ProjectionRegion(10.0),
                          [](const ParameterVector&, std::uint64_t) { return 0.0; }, 1),
                    Error);
}

TEST_CASE("projection region with a control band") {
    auto pr = mfg2d_problem();
    auto arch = architecture_for(pr, {4});
    ParameterVector theta0(arch.parameter_count(), 0.0);
    FitData anchors;
    anchors.t = {0.0, 0.5};
    anchors.y = {Point{0.2, 0.2}, Point{0.8, 0.4}};
    anchors.target = {Point{0.0, 0.0}, Point{0.0, 0.0}};
    ProjectionRegion region(10.0, 0.1, arch, theta0, anchors);
    CHECK(region.contains(theta0));
    ParameterVector far = theta0;
    far.back() = 5.0;  // output bias of the second control
    CHECK_FALSE(region.in_band(far));

    // a step that would leave the band is halved until it fits
    SaSchedule s;
    auto G = [&](const ParameterVector& th, std::uint64_t) { return th.back(); };
    auto res = kw_step(theta0, s, region, G, 0, 1);
    CHECK(region.contains(res.theta));
    CHECK(res.theta.back() > 0.0);
    CHECK(res.theta.back() < s.eps(0));
    CHECK(res.projected);
}

TEST_CASE("improvement: constant objective") {
    MfgProblem pr = testing::constant_coefficients(0.0, 0.5);
    pr.running_cost = [](double, const Point&, const EmpiricalMeasure&, const Point&) { return 0.0; };
    pr.terminal_cost = [](const Point&, const EmpiricalMeasure&) { return 1.7; };
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    ImprovementContext ctx{&pr, build_lattice(pr, steps), steps, testing::frozen_path(Point{0.5}, 100),
                           architecture_for(pr, {4})};
    Rng rng(2);
    for (int k = 0; k < 3; ++k) {
        ParameterVector th(ctx.arch.parameter_count());
        for (auto& v : th) v = rng.uniform(-2.0, 2.0);
        CHECK(improvement(ctx, th, 50, 3) == doctest::Approx(-1.7).epsilon(1e-14));
        CHECK(exact_improvement(ctx, th) == doctest::Approx(-1.7).epsilon(1e-14));
    }
}

TEST_CASE("improvement: pointwise control cost prefers the lower boundary of U") {
    MfgProblem pr = testing::constant_coefficients(0.0, 0.0);
    pr.horizon = 0.01;
    auto steps = StepSizes::make(0.01, 0.2, 0.01);
    ImprovementContext ctx{&pr, build_lattice(pr, steps), steps, testing::frozen_path(Point{0.5}, 1),
                           architecture_for(pr, {3})};
    ParameterVector zero(ctx.arch.parameter_count(), 0.0);
    ParameterVector low = zero;
    low.back() = -10.0;  // output bias drives the sigmoid to 0
    CHECK(exact_improvement(ctx, zero) == doctest::Approx(-0.25 * 0.01));
    CHECK(exact_improvement(ctx, low) > exact_improvement(ctx, zero));
    CHECK(improvement(ctx, low, 100, 1) > improvement(ctx, zero, 100, 1));
    CHECK(exact_improvement(ctx, low) > -1e-8);
}

namespace {

struct LqFixture {
    LqParams p;
    MfgProblem pr = lq_problem(p);
    StepSizes steps = StepSizes::make(1.0, 0.25, 0.01);
    ImprovementContext ctx{&pr, build_lattice(pr, steps), steps, testing::frozen_path(Point{0.5}, 100),
                           architecture_for(pr, {8})};

    ParameterVector fitted() const {
        LqEquilibrium eq(p, std::vector<double>(101, 0.0), 0.01);
        FitData d;
        for (std::size_t n = 0; n < 100; ++n)
            for (std::size_t i = 0; i < ctx.lattice.size(); ++i) {
                const double x = ctx.lattice.node(i)[0];
                d.t.push_back(steps.time(n));
                d.y.push_back(Point{x - 0.5});
                d.target.push_back(Point{eq.control(n, x)});
            }
        d.canonicalize();
        return fit_to_grid(ctx.arch, initial_parameters(ctx.arch, 1), d).theta;
    }
};

}  // namespace

TEST_CASE("improvement: analytic-fitted network beats the zero network on LQ") {
    LqFixture f;
    ParameterVector fit = f.fitted();
    ParameterVector zero(fit.size(), 0.0);
    CHECK(improvement(f.ctx, fit, 10000, 5) > improvement(f.ctx, zero, 10000, 5));
    CHECK(exact_improvement(f.ctx, fit) > exact_improvement(f.ctx, zero));
}

TEST_CASE("common random numbers reduce the variance of K") {
    LqFixture f;
    ParameterVector theta = f.fitted();
    const double delta = 0.1;
    const std::size_t j = 3;
    auto k_estimate = [&](std::uint64_t plus_seed, std::uint64_t minus_seed) {
        ParameterVector a = theta, b = theta;
        a[j] += delta;
        b[j] -= delta;
        return (improvement(f.ctx, a, 200, plus_seed) - improvement(f.ctx, b, 200, minus_seed)) / (2 * delta);
    };
    auto variance = [](const std::vector<double>& v) {
        double m = 0.0, s = 0.0;
        for (double x : v) m += x / v.size();
        for (double x : v) s += (x - m) * (x - m);
        return s / (v.size() - 1);
    };
    std::vector<double> paired, independent;
    for (std::uint64_t r = 0; r < 100; ++r) {
        paired.push_back(k_estimate(1000 + r, 1000 + r));
        independent.push_back(k_estimate(1000 + r, 5000 + r));
    }
    CHECK(variance(paired) < variance(independent));
}
