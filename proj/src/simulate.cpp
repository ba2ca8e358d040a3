#include "hmfg/simulate.hpp"

#include <cmath>

#include "hmfg/error.hpp"
#include "hmfg/rng.hpp"
#include "parallel.hpp"

namespace hmfg {

namespace {

constexpr std::uint64_t kCommonNoiseStream = 0x5eed0c0ffee00001ULL;

PathBundle empty_bundle(const StepSizes& steps, std::size_t n_paths) {
    PathBundle b;
    b.times.resize(steps.n_time + 1);
    for (std::size_t n = 0; n <= steps.n_time; ++n) b.times[n] = steps.time(n);
    b.n_paths = n_paths;
    b.states.resize(n_paths * b.times.size());
    b.controls.resize(n_paths * b.times.size());
    return b;
}

EmpiricalMeasure slice_of(const PathBundle& b, std::size_t n) {
    std::vector<Point> xs(b.n_paths);
    for (std::size_t p = 0; p < b.n_paths; ++p) xs[p] = b.state(p, n);
    return EmpiricalMeasure::uniform(std::move(xs));
}

}  // namespace

std::vector<double> common_noise_path(std::uint64_t seed, const StepSizes& steps) {
    Rng rng(stream_seed(seed, kCommonNoiseStream));
    std::vector<double> w(steps.n_time + 1, 0.0);
    const double scale = std::sqrt(steps.h2);
    for (std::size_t n = 0; n < steps.n_time; ++n) w[n + 1] = w[n] + scale * rng.normal();
    return w;
}

PathBundle simulate_sde(const MfgProblem& problem, const ControlPolicy& policy, const MeasurePath& m_path,
                        const StepSizes& steps, const SdeOptions& options) {
    if (options.n_paths == 0) throw Error(ErrorCode::InvalidParams, "simulation needs at least one path");
    if (!options.live_measure) (void)measure_at(m_path, steps, 0);
    const double rho = problem.common_noise;
    if (rho != 0.0 && problem.state_dim != 1)
        throw Error(ErrorCode::DimensionMismatch, "common noise is supported for one-dimensional states only");

    const std::size_t d = problem.state_dim;
    const std::size_t np = options.n_paths;
    PathBundle b = empty_bundle(steps, np);
    const std::size_t stride = b.n_times();
    const bool shared = rho != 0.0 && options.share_common_noise;
    if (shared) b.common_noise = common_noise_path(options.seed, steps);

    std::vector<Rng> rngs;
    rngs.reserve(np);
    for (std::size_t p = 0; p < np; ++p) rngs.emplace_back(stream_seed(options.seed, p));
    for (std::size_t p = 0; p < np; ++p) {
        Point x0 = problem.sample_initial(rngs[p]);
        b.states[p * stride] = problem.bounded ? problem.domain.clamp(x0) : x0;
    }

    const double sqrt_h2 = std::sqrt(steps.h2);
    const double idio = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    EmpiricalMeasure live;
    for (std::size_t n = 0; n < steps.n_time; ++n) {
        const double t = steps.time(n);
        if (options.live_measure) live = slice_of(b, n);
        const EmpiricalMeasure& m = options.live_measure ? live : measure_at(m_path, steps, n);
        const double dw0_shared = shared ? b.common_noise[n + 1] - b.common_noise[n] : 0.0;
        detail::parallel_for(np, [&](std::size_t p) {
            Rng& rng = rngs[p];
            const Point& x = b.states[p * stride + n];
            const Point alpha = policy(t, x, m);
            Point dw(d);
            for (std::size_t i = 0; i < d; ++i) dw[i] = idio * sqrt_h2 * rng.normal();
            if (rho != 0.0) dw[0] += rho * (shared ? dw0_shared : sqrt_h2 * rng.normal());
            Point next = x + problem.drift(t, x, m, alpha) * steps.h2 + problem.diffusion(t, x).apply(dw);
            if (problem.bounded) next = problem.domain.clamp(next);
            b.controls[p * stride + n] = alpha;
            b.states[p * stride + n + 1] = next;
        });
    }
    for (std::size_t p = 0; p < np; ++p) b.controls[p * stride + steps.n_time] = b.controls[p * stride + steps.n_time - 1];
    return b;
}

PathBundle simulate_chain(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                          const ControlPolicy& policy, const MeasurePath& m_path, std::size_t n_paths,
                          std::uint64_t seed, ChainStats* stats) {
    if (n_paths == 0) throw Error(ErrorCode::InvalidParams, "simulation needs at least one path");
    (void)measure_at(m_path, steps, 0);
    PathBundle b = empty_bundle(steps, n_paths);
    const std::size_t stride = b.n_times();
    std::vector<double> clamped(n_paths, 0.0);

    detail::parallel_for(n_paths, [&](std::size_t p) {
        Rng rng(stream_seed(seed, p));
        std::size_t node = lattice.nearest(problem.sample_initial(rng));
        b.states[p * stride] = lattice.node(node);
        for (std::size_t n = 0; n < steps.n_time; ++n) {
            const double t = steps.time(n);
            const EmpiricalMeasure& m = measure_at(m_path, steps, n);
            const Point x = lattice.node(node);
            const Point alpha = policy(t, x, m);
            const TransitionRow row = transition_row(problem, lattice, steps, t, node, m, alpha);
            clamped[p] += row.clamped_mass;
            const double u = rng.uniform();
            double cumulative = 0.0;
            std::size_t next = row.entries[row.count - 1].target;
            for (const auto& e : row.targets()) {
                cumulative += e.probability;
                if (u < cumulative) {
                    next = e.target;
                    break;
                }
            }
            node = next;
            b.controls[p * stride + n] = alpha;
            b.states[p * stride + n + 1] = lattice.node(node);
        }
        b.controls[p * stride + steps.n_time] = b.controls[p * stride + steps.n_time - 1];
    });
    if (stats) {
        double total = 0.0;
        for (double c : clamped) total += c;
        stats->clamped_fraction = total / static_cast<double>(n_paths * steps.n_time);
    }
    return b;
}

CostEstimate estimate_cost(const MfgProblem& problem, const PathBundle& bundle, const MeasurePath& m_path,
                           const StepSizes& steps) {
    if (bundle.n_paths == 0) throw Error(ErrorCode::InvalidParams, "empty path bundle");
    if (bundle.n_times() != steps.n_time + 1)
        throw Error(ErrorCode::LengthMismatch, "bundle time grid does not match the step sizes");
    std::vector<double> cost(bundle.n_paths, 0.0);
    const EmpiricalMeasure& terminal = measure_at(m_path, steps, steps.n_time);
    detail::parallel_for(bundle.n_paths, [&](std::size_t p) {
        double s = 0.0;
        for (std::size_t n = 0; n < steps.n_time; ++n)
            s += problem.running_cost(steps.time(n), bundle.state(p, n), measure_at(m_path, steps, n),
                                      bundle.control(p, n)) *
                 steps.h2;
        cost[p] = s + problem.terminal_cost(bundle.state(p, steps.n_time), terminal);
    });
    // Shifted by the first sample so that identical costs give exactly zero spread.
    const double shift = cost.front();
    const double n = static_cast<double>(cost.size());
    double mean_shifted = 0.0;
    for (double c : cost) mean_shifted += c - shift;
    mean_shifted /= n;
    double var = 0.0;
    for (double c : cost) var += (c - shift - mean_shifted) * (c - shift - mean_shifted);
    const double se = cost.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    return {shift + mean_shifted, se};
}

MeasurePath bundle_measures(const PathBundle& bundle) {
    MeasurePath out;
    out.reserve(bundle.n_times());
    for (std::size_t n = 0; n < bundle.n_times(); ++n) out.push_back(slice_of(bundle, n));
    return out;
}

MeasurePath induced_measure(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                            const ControlPolicy& policy, const MeasurePath& m_in, std::size_t n_particles,
                            std::uint64_t seed, ChainStats* stats) {
    const PathBundle b = simulate_chain(problem, lattice, steps, policy, m_in, n_particles, seed, stats);
    MeasurePath out = bundle_measures(b);
    for (auto& m : out) m = compact(m);
    return out;
}

}  // namespace hmfg
