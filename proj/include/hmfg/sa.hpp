#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hmfg/lattice.hpp"
#include "hmfg/policy_net.hpp"

namespace hmfg {

/// Kiefer-Wolfowitz step sizes eps_l = eps0 / (l+1)^p_eps and
/// delta_l = delta0 / (l+1)^p_delta.
struct SaSchedule {
    double eps0 = 0.5;
    double delta0 = 0.5;
    double p_eps = 1.0;
    double p_delta = 0.25;
    std::size_t max_steps = 5000;
    /// Stop when the moving average of G changes by less than this.
    double trigger = 1e-5;
    std::size_t window = 10;
    /// Evaluate all 2r perturbations of a step with one shared seed.
    bool paired_seeds = true;

    friend bool operator==(const SaSchedule&, const SaSchedule&) = default;

    double eps(std::size_t l) const;
    double delta(std::size_t l) const;
    /// Throws InvalidParams unless eps_l -> 0, sum eps_l = inf,
    /// eps_l / delta_l -> 0 and sum eps_l^2 / delta_l^2 < inf, i.e.
    /// 0 < p_eps <= 1, p_delta < p_eps and 2 (p_eps - p_delta) > 1.
    void validate() const;
};

/// Parameter box |theta_j| <= bound, optionally intersected with a band of
/// half-width `band` around anchor controls N(t, y, theta_0).
class ProjectionRegion {
public:
    ProjectionRegion() = default;
    /// Box only.
    explicit ProjectionRegion(double bound);
    /// Box plus control band at the anchor inputs of `anchors`.
    ProjectionRegion(double bound, double band, const NetworkArchitecture& arch, const ParameterVector& theta0,
                     const FitData& anchors);

    double bound() const { return bound_; }
    ParameterVector clamp(ParameterVector theta) const;
    bool in_band(const ParameterVector& theta) const;
    bool contains(const ParameterVector& theta) const;

private:
    double bound_ = 10.0;
    double band_ = 0.0;
    NetworkArchitecture arch_;
    FitData anchors_;
};

/// Noisy observation of the improvement function G at theta. The seed
/// selects the random numbers; equal seeds give common random numbers.
using ImprovementFn = std::function<double(const ParameterVector& theta, std::uint64_t seed)>;

struct KwResult {
    ParameterVector theta;
    /// Central finite-difference gradient estimate K_l.
    ParameterVector gradient;
    /// z_l = (theta_{l+1} - theta_l - eps_l K_l) / eps_l.
    ParameterVector projection;
    bool projected = false;
    double eps = 0.0;
    double delta = 0.0;
};

/// theta_{l+1} = Pi_H[theta_l + eps_l K_l]. Pi_H clamps into the parameter
/// box, then halves the step (up to 20 times) while the control band is
/// violated; if no halving fits, theta_l is kept.
KwResult kw_step(const ParameterVector& theta, const SaSchedule& schedule, const ProjectionRegion& region,
                 const ImprovementFn& improvement, std::size_t l, std::uint64_t seed);

struct SaTraceRecord {
    std::size_t l = 0;
    double G = 0.0;
    double eps = 0.0;
    double delta = 0.0;
    double grad_norm = 0.0;
    bool projected = false;
};

struct TrainResult {
    ParameterVector theta;
    double best_G = 0.0;
    std::size_t steps = 0;
    std::vector<SaTraceRecord> trace;
};

/// Iterates kw_step until the windowed moving average of G moves by less
/// than the trigger or max_steps is reached; returns the best-G iterate.
TrainResult train(const ParameterVector& theta_init, const SaSchedule& schedule, const ProjectionRegion& region,
                  const ImprovementFn& improvement, std::uint64_t seed);

/// Everything needed to score a network on the fine lattice.
struct ImprovementContext {
    const MfgProblem* problem = nullptr;
    Lattice lattice;
    StepSizes steps;
    MeasurePath m_path;
    NetworkArchitecture arch;
};

/// Monte-Carlo G: minus the average cost-to-go of n_mc chain paths, each
/// started from a lattice point (t_n, x_i) drawn uniformly.
double improvement(const ImprovementContext& ctx, const ParameterVector& theta, std::size_t n_mc,
                   std::uint64_t seed);

/// Exact G: minus the average over all lattice points of the cost-to-go,
/// computed by a backward policy-evaluation sweep.
double exact_improvement(const ImprovementContext& ctx, const ParameterVector& theta);

}  // namespace hmfg
