#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmfg/models.hpp"
#include "hmfg/policy_net.hpp"
#include "hmfg/simulate.hpp"

namespace hmfg {

/// Learned vs analytic LQ trajectories in one common-noise scenario. Both
/// populations share the initial draws, idiosyncratic noise and W0.
struct LqScenario {
    std::uint64_t seed = 0;
    PathBundle learned;   // live measure, network control
    PathBundle analytic;  // equilibrium control along u_t = E[X0] + rho sigma W0_t
    std::vector<double> learned_mean;
    std::vector<double> analytic_mean;
    std::vector<double> eta;
    /// time averages over particles and grid times
    double control_error = 0.0;  // |a_hat - (q + eta)(u_hat - X)|
    double mean_error = 0.0;     // |u_hat - u|
    double state_error = 0.0;    // |X_hat - X|
};

std::vector<LqScenario> compare_lq(const LqParams& params, const LqOptions& box, const NetworkArchitecture& arch,
                                   const ParameterVector& theta, const StepSizes& steps, std::size_t n_particles,
                                   std::size_t n_scenarios, std::uint64_t seed);

/// Long-format CSV: scenario,path,t,x_hat,x,alpha_hat,alpha,u_hat,u,w0 for the
/// first `tracked` particles of every scenario.
void write_lq_trajectories(const std::string& path, const std::vector<LqScenario>& scenarios, const LqParams& params,
                           std::size_t tracked);

}  // namespace hmfg
