#pragma once

#include "hmfg/problem.hpp"

namespace hmfg::testing {

// 1-D problem on [0, 1] with constant drift b and diffusion sigma, controls
// in [0, 1], f = alpha^2 and g = 0 unless overridden.
inline MfgProblem constant_coefficients(double b, double sigma) {
    MfgProblem pr;
    pr.name = "constant";
    pr.state_dim = 1;
    pr.control_dim = 1;
    pr.domain = Box{Point{0.0}, Point{1.0}};
    pr.controls = Box{Point{0.0}, Point{1.0}};
    pr.drift = [b](double, const Point&, const EmpiricalMeasure&, const Point&) { return Point{b}; };
    pr.diffusion = [sigma](double, const Point&) { return SmallMatrix::diagonal(1, sigma); };
    pr.running_cost = [](double, const Point&, const EmpiricalMeasure&, const Point& a) { return a[0] * a[0]; };
    pr.terminal_cost = [](const Point&, const EmpiricalMeasure&) { return 0.0; };
    pr.sample_initial = [](Rng& rng) { return Point{rng.uniform()}; };
    pr.policy_box = pr.domain;
    return pr;
}

inline MeasurePath frozen_path(const Point& x, std::size_t n_time) {
    return MeasurePath(n_time + 1, EmpiricalMeasure::dirac(x));
}

}  // namespace hmfg::testing
