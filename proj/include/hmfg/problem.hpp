#pragma once

#include <functional>
#include <string>

#include "hmfg/measure.hpp"
#include "hmfg/rng.hpp"
#include "hmfg/types.hpp"

namespace hmfg {

/// One finite-horizon mean-field game instance: controlled dynamics
/// dX = b(t, X, m, a) dt + sigma(t, X) dW, running cost f and terminal cost g.
///
/// The measure argument is the population slice at the current time. Models
/// read whatever statistic they need from it (usually the cached mean).
struct MfgProblem {
    using DriftFn = std::function<Point(double t, const Point& x, const EmpiricalMeasure& m, const Point& a)>;
    using DiffusionFn = std::function<SmallMatrix(double t, const Point& x)>;
    using RunningCostFn = std::function<double(double t, const Point& x, const EmpiricalMeasure& m, const Point& a)>;
    using TerminalCostFn = std::function<double(const Point& x, const EmpiricalMeasure& m)>;
    using SamplerFn = std::function<Point(Rng& rng)>;
    using PolicyStateFn = std::function<Point(const Point& x, const EmpiricalMeasure& m)>;

    std::string name;
    std::size_t state_dim = 0;
    std::size_t control_dim = 0;
    /// State box Q. For unbounded models this is the lattice truncation box.
    Box domain;
    /// When true, simulated SDE states are clamped to `domain`.
    bool bounded = true;
    /// Control box U.
    Box controls;
    double horizon = 1.0;
    /// Loading rho of the shared Brownian motion: the noise increment is
    /// sigma (rho dW0 + sqrt(1 - rho^2) dW).
    double common_noise = 0.0;

    DriftFn drift;
    DiffusionFn diffusion;
    RunningCostFn running_cost;
    TerminalCostFn terminal_cost;
    SamplerFn sample_initial;

    /// Coordinates in which feedback policies are expressed. Empty means the
    /// raw state. Translation-invariant models use x minus the population mean.
    PolicyStateFn policy_state;
    /// Normalization box of the policy coordinates.
    Box policy_box;

    Point policy_coordinates(const Point& x, const EmpiricalMeasure& m) const {
        return policy_state ? policy_state(x, m) : x;
    }

    /// Covariance rate of the lattice chain. The chain lives in the frame of
    /// one common-noise scenario, so only the idiosyncratic part
    /// (1 - rho^2) sigma sigma^T is carried.
    SmallMatrix chain_covariance(double t, const Point& x) const {
        SmallMatrix a = diffusion(t, x).outer_self();
        const double keep = 1.0 - common_noise * common_noise;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < a.size(); ++j) a(i, j) *= keep;
        return a;
    }

    /// Throws InvalidParams / DimensionMismatch on an inconsistent definition.
    void validate() const;
};

}  // namespace hmfg
