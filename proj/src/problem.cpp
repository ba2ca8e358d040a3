#include "hmfg/problem.hpp"

#include "hmfg/error.hpp"

namespace hmfg {

void MfgProblem::validate() const {
    if (state_dim == 0 || state_dim > kMaxDim || control_dim == 0 || control_dim > kMaxDim)
        throw Error(ErrorCode::DimensionMismatch, "state and control dimensions must lie in 1..3");
    if (domain.dim() != state_dim || domain.upper.size() != state_dim)
        throw Error(ErrorCode::DimensionMismatch, "domain box dimension differs from state dimension");
    if (controls.dim() != control_dim || controls.upper.size() != control_dim)
        throw Error(ErrorCode::DimensionMismatch, "control box dimension differs from control dimension");
    for (std::size_t i = 0; i < state_dim; ++i)
        if (!(domain.lower[i] < domain.upper[i])) throw Error(ErrorCode::InvalidParams, "empty domain box");
    for (std::size_t i = 0; i < control_dim; ++i)
        if (!(controls.lower[i] <= controls.upper[i])) throw Error(ErrorCode::InvalidParams, "empty control box");
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidParams, "horizon must be positive");
    if (!(common_noise >= -1.0 && common_noise <= 1.0))
        throw Error(ErrorCode::InvalidParams, "common-noise loading must lie in [-1, 1]");
    if (!drift || !diffusion || !running_cost || !terminal_cost || !sample_initial)
        throw Error(ErrorCode::InvalidParams, "problem '" + name + "' is missing a callback");
    if (policy_state && policy_box.dim() != state_dim)
        throw Error(ErrorCode::DimensionMismatch, "policy box dimension differs from state dimension");
}

}  // namespace hmfg
