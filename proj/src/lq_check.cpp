#include "hmfg/lq_check.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hmfg/error.hpp"
#include "hmfg/rng.hpp"

namespace hmfg {

namespace {

std::vector<double> mean_path(const PathBundle& b) {
    std::vector<double> out(b.n_times(), 0.0);
    for (std::size_t n = 0; n < b.n_times(); ++n) {
        double s = 0.0;
        for (std::size_t p = 0; p < b.n_paths; ++p) s += b.state(p, n)[0];
        out[n] = s / static_cast<double>(b.n_paths);
    }
    return out;
}

}  // namespace

std::vector<LqScenario> compare_lq(const LqParams& params, const LqOptions& box, const NetworkArchitecture& arch,
                                   const ParameterVector& theta, const StepSizes& steps, std::size_t n_particles,
                                   std::size_t n_scenarios, std::uint64_t seed) {
    const MfgProblem problem = lq_problem(params, box);
    const ControlPolicy learned_policy = network_policy(problem, arch, theta);
    const std::size_t nt = steps.n_time;

    std::vector<double> eta(nt + 1);
    for (std::size_t n = 0; n <= nt; ++n) eta[n] = riccati_closed_form(params, std::min(steps.time(n), params.T));
    const double q = params.q;
    const ControlPolicy analytic_policy = [eta, q, steps](double t, const Point& x, const EmpiricalMeasure& m) {
        const std::size_t n = std::min(steps.index_of(t), eta.size() - 1);
        return Point{(q + eta[n]) * (m.mean()[0] - x[0])};
    };

    std::vector<LqScenario> out;
    for (std::size_t s = 0; s < n_scenarios; ++s) {
        LqScenario sc;
        sc.seed = stream_seed(seed, 0x1a5ce4a210ULL, s);
        sc.eta = eta;

        SdeOptions live{n_particles, sc.seed, true, true};
        sc.learned = simulate_sde(problem, learned_policy, {}, steps, live);

        if (sc.learned.common_noise.empty()) sc.learned.common_noise.assign(nt + 1, 0.0);
        const LqEquilibrium eq(params, sc.learned.common_noise, steps.h2);
        MeasurePath dirac;
        for (std::size_t n = 0; n <= nt; ++n) dirac.push_back(EmpiricalMeasure::dirac(Point{eq.mean_field(n)}));
        SdeOptions frozen{n_particles, sc.seed, true, false};
        sc.analytic = simulate_sde(problem, analytic_policy, dirac, steps, frozen);
        if (sc.analytic.common_noise.empty()) sc.analytic.common_noise.assign(nt + 1, 0.0);
        if (sc.analytic.common_noise != sc.learned.common_noise)
            throw Error(ErrorCode::InvalidParams, "scenario common-noise paths differ");

        sc.learned_mean = mean_path(sc.learned);
        for (std::size_t n = 0; n <= nt; ++n) sc.analytic_mean.push_back(eq.mean_field(n));

        const double np = static_cast<double>(n_particles);
        double control = 0.0, state = 0.0, mean = 0.0;
        for (std::size_t n = 0; n <= nt; ++n) {
            double c = 0.0, x = 0.0;
            for (std::size_t p = 0; p < n_particles; ++p) {
                const double xh = sc.learned.state(p, n)[0];
                const double xa = sc.analytic.state(p, n)[0];
                x += std::abs(xh - xa);
                if (n < nt) c += std::abs(sc.learned.control(p, n)[0] - (q + eta[n]) * (sc.learned_mean[n] - xa));
            }
            state += x / np;
            if (n < nt) control += c / np;
            mean += std::abs(sc.learned_mean[n] - sc.analytic_mean[n]);
        }
        sc.control_error = control / static_cast<double>(nt);
        sc.state_error = state / static_cast<double>(nt + 1);
        sc.mean_error = mean / static_cast<double>(nt + 1);
        out.push_back(std::move(sc));
    }
    return out;
}

void write_lq_trajectories(const std::string& path, const std::vector<LqScenario>& scenarios, const LqParams& params,
                           std::size_t tracked) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    f << "scenario,path,t,x_hat,x,alpha_hat,alpha,u_hat,u,w0\n";
    char buf[512];
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const LqScenario& sc = scenarios[s];
        const std::size_t np = std::min(tracked, sc.learned.n_paths);
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t n = 0; n < sc.learned.n_times(); ++n) {
                const double xa = sc.analytic.state(p, n)[0];
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", s, p,
                              sc.learned.times[n], sc.learned.state(p, n)[0], xa, sc.learned.control(p, n)[0],
                              (params.q + sc.eta[n]) * (sc.analytic_mean[n] - xa), sc.learned_mean[n],
                              sc.analytic_mean[n], sc.learned.common_noise[n]);
                f << buf;
            }
    }
}

}  // namespace hmfg
