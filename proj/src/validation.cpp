#include "hmfg/validation.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "hmfg/config.hpp"
#include "hmfg/error.hpp"
#include "hmfg/lattice.hpp"
#include "hmfg/models.hpp"
#include "hmfg/policy_net.hpp"
#include "hmfg/rng.hpp"
#include "hmfg/sa.hpp"

namespace hmfg {

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome riccati_suite() {
    const LqParams p;
    const RiccatiTable ode = riccati_ode_solve(p, 10000);
    double worst = 0.0;
    for (std::size_t i = 0; i < ode.t.size(); ++i)
        worst = std::max(worst, std::abs(ode.eta[i] - riccati_closed_form(p, ode.t[i])));
    const bool terminal = riccati_closed_form(p, p.T) == p.c;
    return {worst <= 1e-6 && terminal, "max |closed - ode| = " + sci(worst)};
}

Outcome chain_suite() {
    const MfgProblem problem = mfg2d_problem();
    const StepSizes steps = StepSizes::make(problem.horizon, 0.2, 0.01);
    const Lattice lattice = build_lattice(problem, steps);
    Rng rng(stream_seed(7, 1));
    std::size_t failures = 0, checked = 0;
    while (checked < 200) {
        const std::size_t node = static_cast<std::size_t>(rng.uniform() * static_cast<double>(lattice.size()));
        if (node >= lattice.size() || lattice.on_boundary(node)) continue;
        const double t = rng.uniform() * problem.horizon;
        const EmpiricalMeasure m = EmpiricalMeasure::dirac(Point{rng.uniform(), rng.uniform()});
        const Point a{1.5 * rng.uniform(), 1.5 * rng.uniform()};
        const TransitionRow row = transition_row(problem, lattice, steps, t, node, m, a);
        const auto rep = check_local_consistency(row, problem, lattice, steps, t, m, a);
        bool ok = rep.pass && std::abs(row.total() - 1.0) <= 1e-12;
        for (const auto& e : row.targets()) ok = ok && e.probability >= 0.0;
        failures += ok ? 0 : 1;
        ++checked;
    }
    return {failures == 0, std::to_string(failures) + " of 200 rows inconsistent"};
}

Outcome wasserstein_suite() {
    Rng rng(stream_seed(7, 2));
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 5.0);
        const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform() * 3.0);
        std::vector<Point> a, b;
        for (std::size_t i = 0; i < n; ++i) {
            Point x(d), y(d);
            for (std::size_t j = 0; j < d; ++j) {
                x[j] = rng.normal();
                y[j] = rng.normal();
            }
            a.push_back(x);
            b.push_back(y);
        }
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = INFINITY;
        do {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += squared_distance(a[i], b[perm[i]]);
            best = std::min(best, s / static_cast<double>(n));
        } while (std::next_permutation(perm.begin(), perm.end()));
        const double w = wasserstein2(EmpiricalMeasure::uniform(a), EmpiricalMeasure::uniform(b));
        worst = std::max(worst, std::abs(w - std::sqrt(best)));
    }
    return {worst <= 1e-12, "max |assignment - brute force| = " + sci(worst)};
}

Outcome gradient_suite() {
    Rng rng(stream_seed(7, 3));
    double worst = 0.0;
    for (int c = 0; c < 5; ++c) {
        NetworkArchitecture arch;
        arch.state_dim = 1 + static_cast<std::size_t>(c % 2);
        arch.control_dim = 1 + static_cast<std::size_t>(c % 2);
        arch.hidden = {4, 3};
        arch.horizon = 1.0;
        arch.input_box = Box{Point(arch.state_dim), Point(arch.state_dim)};
        arch.control_box = Box{Point(arch.control_dim), Point(arch.control_dim)};
        for (std::size_t j = 0; j < arch.state_dim; ++j) {
            arch.input_box.lower[j] = -1.0;
            arch.input_box.upper[j] = 2.0;
        }
        for (std::size_t j = 0; j < arch.control_dim; ++j) {
            arch.control_box.lower[j] = -1.0;
            arch.control_box.upper[j] = 1.0;
        }
        ParameterVector theta(arch.parameter_count());
        for (double& v : theta) v = 0.8 * rng.normal();
        FitData data;
        for (int s = 0; s < 6; ++s) {
            Point y(arch.state_dim), target(arch.control_dim);
            for (std::size_t j = 0; j < arch.state_dim; ++j) y[j] = -1.0 + 3.0 * rng.uniform();
            for (std::size_t j = 0; j < arch.control_dim; ++j) target[j] = -1.0 + 2.0 * rng.uniform();
            data.t.push_back(rng.uniform());
            data.y.push_back(y);
            data.target.push_back(target);
        }
        const ParameterVector g = grad_fit_loss(arch, theta, data);
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
            ParameterVector up = theta, down = theta;
            up[j] += h;
            down[j] -= h;
            const double fd = (fit_loss(arch, up, data) - fit_loss(arch, down, data)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - g[j]) / std::max(1e-3, std::abs(g[j])));
        }
    }
    return {worst <= 1e-4, "max relative backprop/FD gap = " + sci(worst)};
}

Outcome kw_suite() {
    const ParameterVector target{0.3, -0.2, 0.5, 0.1, -0.4};
    auto G = [&](const ParameterVector& th, std::uint64_t) {
        double s = 0.0;
        for (std::size_t j = 0; j < th.size(); ++j) s += (th[j] - target[j]) * (th[j] - target[j]);
        return -s;
    };
    ParameterVector start = target;
    start[0] += 1.0;
    const TrainResult res = train(start, SaSchedule{}, ProjectionRegion(10.0), G, 1);
    double err = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) err = std::max(err, std::abs(res.theta[j] - target[j]));
    return {err <= 1e-2, "max |theta - theta*| = " + sci(err) + " after " + std::to_string(res.steps) +
                             " steps"};
}

Outcome config_suite() {
    RunConfig c;
    c.model = "mfg2d";
    c.lq.rho = std::nextafter(0.1, 1.0);
    c.fit.trigger = 1.0 / 3.0;
    c.hidden = {5, 7, 2};
    const bool same = parse_config_text(serialize_config(c)) == c;
    return {same, same ? "round trip exact" : "round trip changed the config"};
}

}  // namespace

bool run_validation(std::ostream& out) {
    const std::pair<const char*, std::function<Outcome()>> suites[] = {
        {"riccati", riccati_suite},         {"chain-consistency", chain_suite},
        {"wasserstein", wasserstein_suite}, {"backprop", gradient_suite},
        {"kiefer-wolfowitz", kw_suite},     {"config", config_suite},
    };
    bool all = true;
    for (const auto& [name, suite] : suites) {
        Outcome o;
        try {
            o = suite();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        all = all && o.pass;
        out << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << '\n';
    }
    return all;
}

}  // namespace hmfg
