#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "hmfg/error.hpp"
#include "hmfg/models.hpp"
#include "hmfg/policy_net.hpp"
#include "hmfg/rng.hpp"

using namespace hmfg;
using hmfg::testing::oracle_loss;

namespace {

NetworkArchitecture arch2d(std::vector<std::size_t> hidden) { return architecture_for(mfg2d_problem(), std::move(hidden)); }

FitData random_samples(Rng& rng, const NetworkArchitecture& arch, std::size_t n) {
    FitData d;
    for (std::size_t k = 0; k < n; ++k) {
        d.t.push_back(rng.uniform(0.0, arch.horizon));
        Point y(arch.state_dim), a(arch.control_dim);
        for (std::size_t i = 0; i < arch.state_dim; ++i) y[i] = rng.uniform(arch.input_box.lower[i], arch.input_box.upper[i]);
        for (std::size_t i = 0; i < arch.control_dim; ++i) a[i] = rng.uniform(arch.control_box.lower[i], arch.control_box.upper[i]);
        d.y.push_back(y);
        d.target.push_back(a);
    }
    return d;
}

}  // namespace

TEST_CASE("forward: zero parameters give the midpoint of U") {
    auto arch = arch2d({32, 32});
    ParameterVector zero(arch.parameter_count(), 0.0);
    auto a = forward(arch, zero, 0.3, Point{0.2, 0.9});
    CHECK(a[0] == 0.75);
    CHECK(a[1] == 0.75);
    CHECK(forward(arch, zero, 0.3, Point{0.2, 0.9}) == a);
    CHECK_THROWS_AS(forward(arch, ParameterVector(3, 0.0), 0.0, Point{0.0, 0.0}), Error);
    CHECK(arch.parameter_count() == 3 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
}

TEST_CASE("forward: output stays in U") {
    auto arch = arch2d({16, 16});
    Rng rng(1);
    bool inside = true;
    ParameterVector theta(arch.parameter_count());
    for (int s = 0; s < 1000000; ++s) {
        if (s % 1000 == 0)
            for (auto& v : theta) v = rng.uniform(-10.0, 10.0) * (s % 3000 == 0 ? 100.0 : 1.0);
        const Point a = forward(arch, theta, rng.uniform(-1.0, 2.0), Point{rng.uniform(-2.0, 3.0), rng.uniform(-2.0, 3.0)});
        inside = inside && arch.control_box.contains(a);
    }
    CHECK(inside);
}

TEST_CASE("grad_fit_loss matches central differences") {
    Rng rng(2);
    for (int inst = 0; inst < 20; ++inst) {
        std::vector<std::size_t> hidden;
        for (std::size_t l = 0; l < 1 + inst % 3; ++l) hidden.push_back(2 + rng.next_u64() % 5);
        NetworkArchitecture arch =
            inst % 2 ? arch2d(hidden) : architecture_for(lq_problem(LqParams{}), hidden);
        ParameterVector theta(arch.parameter_count());
        for (auto& v : theta) v = rng.uniform(-1.5, 1.5);
        FitData data = random_samples(rng, arch, 5);

        const ParameterVector g = grad_fit_loss(arch, theta, data);
        std::vector<long double> th(theta.begin(), theta.end());
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const long double h = 1e-6L;
            auto plus = th, minus = th;
            plus[j] += h;
            minus[j] -= h;
            const long double fd = (oracle_loss(arch, plus, data) - oracle_loss(arch, minus, data)) / (2.0L * h);
            const double rel = std::abs(g[j] - static_cast<double>(fd)) / std::max(std::abs(static_cast<double>(fd)), 1e-6);
            CHECK(rel <= 1e-5);
        }
        double loss = 0.0;
        grad_fit_loss(arch, theta, data, &loss);
        CHECK(loss == doctest::Approx(static_cast<double>(oracle_loss(arch, th, data))).epsilon(1e-12));
    }
}

TEST_CASE("zero-residual targets give a zero gradient") {
    auto arch = arch2d({6, 5});
    Rng rng(3);
    ParameterVector theta = initial_parameters(arch, 4);
    FitData data = random_samples(rng, arch, 20);
    for (std::size_t k = 0; k < data.size(); ++k) data.target[k] = forward(arch, theta, data.t[k], data.y[k]);
    double loss = 1.0;
    auto g = grad_fit_loss(arch, theta, data, &loss);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) <= 1e-8);
    CHECK(loss == 0.0);
}

TEST_CASE("fit_to_grid: midpoint field at zero parameters") {
    auto pr = mfg2d_problem();
    auto arch = arch2d({32, 32});
    auto steps = StepSizes::make(1.0, 0.2, 0.01);
    auto lat = build_lattice(pr, steps);
    GridControlField field(100, lat.size(), Point{0.75, 0.75});
    auto data = make_fit_data(pr, lat, steps, testing::frozen_path(Point{0.5, 0.5}, 100), field);
    CHECK(data.size() == 3600);
    ParameterVector zero(arch.parameter_count(), 0.0);
    auto res = fit_to_grid(arch, zero, data);
    CHECK(res.steps == 0);
    CHECK(res.mse == 0.0);
    CHECK(res.theta == zero);
}

TEST_CASE("fit_to_grid: affine 1-D field") {
    MfgProblem pr = testing::constant_coefficients(0.0, 0.5);
    pr.controls = Box{Point{-1.0}, Point{1.0}};
    auto arch = architecture_for(pr, {32});
    auto steps = StepSizes::make(1.0, 0.2, 0.1);
    auto lat = build_lattice(pr, steps);
    CHECK(lat.size() == 6);
    GridControlField field(steps.n_time, lat.size(), Point{0.0});
    for (std::size_t n = 0; n < steps.n_time; ++n)
        for (std::size_t i = 0; i < lat.size(); ++i) field.at(n, i) = Point{0.8 - 1.2 * lat.node(i)[0]};
    auto data = make_fit_data(pr, lat, steps, testing::frozen_path(Point{0.5}, steps.n_time), field);
    auto res = fit_to_grid(arch, initial_parameters(arch, 1), data);
    CHECK(res.mse <= 1e-3);
    for (std::size_t k = 1; k < res.history.size(); ++k) CHECK(res.history[k] <= res.history[k - 1]);
    for (double v : res.theta) CHECK(std::abs(v) <= 10.0);
}

TEST_CASE("fit_to_grid does not depend on sample order") {
    auto arch = arch2d({5});
    Rng rng(6);
    FitData data = random_samples(rng, arch, 40);
    FitData shuffled;
    std::vector<std::size_t> order(40);
    for (std::size_t k = 0; k < 40; ++k) order[k] = (k * 17 + 3) % 40;
    for (std::size_t k : order) {
        shuffled.t.push_back(data.t[k]);
        shuffled.y.push_back(data.y[k]);
        shuffled.target.push_back(data.target[k]);
    }
    data.canonicalize();
    shuffled.canonicalize();
    FitOptions opts;
    opts.max_steps = 50;
    auto a = fit_to_grid(arch, initial_parameters(arch, 2), data, opts);
    auto b = fit_to_grid(arch, initial_parameters(arch, 2), shuffled, opts);
    CHECK(a.theta == b.theta);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    auto arch = arch2d({7, 3});
    ParameterVector theta = initial_parameters(arch, 9);
    theta[0] = 0.1 + 0.2;
    theta[1] = -1e-300;
    const auto dir = std::filesystem::temp_directory_path() / "hmfg_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "theta.csv").string();
    write_checkpoint(path, arch, theta);
    CHECK(read_parameters(path) == theta);
    CHECK(read_architecture(path) == arch);
    CHECK_THROWS_AS(read_parameters((dir / "missing.csv").string()), Error);
}
