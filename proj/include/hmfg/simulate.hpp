#pragma once

#include <cstdint>
#include <vector>

#include "hmfg/lattice.hpp"
#include "hmfg/policy.hpp"

namespace hmfg {

/// Simulated paths on the time grid t_n = n h2, n = 0..n_time.
struct PathBundle {
    std::vector<double> times;
    std::size_t n_paths = 0;
    /// states[p * times.size() + n]
    std::vector<Point> states;
    /// controls[p * times.size() + n]; the entry at n_time repeats the last
    /// applied control.
    std::vector<Point> controls;
    /// Shared common-noise path W0 at the grid times, when one was used.
    std::vector<double> common_noise;

    std::size_t n_times() const { return times.size(); }
    const Point& state(std::size_t p, std::size_t n) const { return states[p * times.size() + n]; }
    const Point& control(std::size_t p, std::size_t n) const { return controls[p * times.size() + n]; }
};

struct SdeOptions {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    /// One W0 path for all particles (the scenario) rather than one per path.
    bool share_common_noise = true;
    /// Use the particles' own empirical law as m_t instead of `m_path`.
    bool live_measure = false;
};

/// Brownian path W0 at n_time + 1 grid points for scenario `seed`.
std::vector<double> common_noise_path(std::uint64_t seed, const StepSizes& steps);

/// Euler-Maruyama for dX = b dt + sigma (rho dW0 + sqrt(1 - rho^2) dW) with
/// rho the problem's common-noise loading. States are clamped to the domain
/// for bounded problems.
PathBundle simulate_sde(const MfgProblem& problem, const ControlPolicy& policy, const MeasurePath& m_path,
                        const StepSizes& steps, const SdeOptions& options);

struct ChainStats {
    /// Share of transition probability mass that was redirected by clamping.
    double clamped_fraction = 0.0;
};

/// Samples the approximating Markov chain under a frozen measure path.
/// Initial draws are snapped to the nearest node.
PathBundle simulate_chain(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                          const ControlPolicy& policy, const MeasurePath& m_path, std::size_t n_paths,
                          std::uint64_t seed, ChainStats* stats = nullptr);

struct CostEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Per-path sum_n f(t_n, X_n, m_n, alpha_n) h2 + g(X_N, m_N); sample mean and SE.
CostEstimate estimate_cost(const MfgProblem& problem, const PathBundle& bundle, const MeasurePath& m_path,
                           const StepSizes& steps);

/// Equal-weight empirical law of the bundle at every grid time.
MeasurePath bundle_measures(const PathBundle& bundle);

/// Law of the chain controlled by `policy` under the frozen path m_in.
MeasurePath induced_measure(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                            const ControlPolicy& policy, const MeasurePath& m_in, std::size_t n_particles,
                            std::uint64_t seed, ChainStats* stats = nullptr);

}  // namespace hmfg
