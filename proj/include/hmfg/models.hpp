#pragma once

#include <vector>

#include "hmfg/problem.hpp"

namespace hmfg {

/// Linear-quadratic game with common noise:
///   dX = [a(u - X) + alpha] dt + sigma (rho dW0 + sqrt(1 - rho^2) dW)
///   f = alpha^2/2 - q alpha (u - X) + (epsilon/2)(u - X)^2,  g = (c/2)(u - X)^2
/// where u is the conditional population mean. X0 ~ U(0, 1).
struct LqParams {
    double a = 0.1;
    double q = 0.1;
    double c = 0.5;
    double epsilon = 0.5;
    double rho = 0.2;
    double sigma = 1.0;
    double T = 1.0;

    /// Throws InvalidParams unless epsilon - q^2 > 0, c >= 0, |rho| <= 1,
    /// sigma > 0 and T > 0.
    void validate() const;

    friend bool operator==(const LqParams&, const LqParams&) = default;
};

/// Mean of the U(0, 1) initial law.
inline constexpr double kLqInitialMean = 0.5;

struct LqOptions {
    /// Lattice truncation of the real line.
    double lower = -2.0;
    double upper = 3.0;
    /// Controls are restricted to [-control_bound, control_bound].
    double control_bound = 3.0;

    friend bool operator==(const LqOptions&, const LqOptions&) = default;
};

/// Policies are expressed in the centered coordinate x - u, so a network
/// fitted against one population path transfers to any common-noise path.
MfgProblem lq_problem(const LqParams& params, const LqOptions& options = {});

/// Closed-form Riccati solution eta_t of
///   eta' = 2(a + q) eta + eta^2 - (epsilon - q^2),  eta_T = c.
/// Throws OutOfHorizon for t outside [0, T].
double riccati_closed_form(const LqParams& params, double t);

struct RiccatiTable {
    std::vector<double> t;
    std::vector<double> eta;
};

/// Backward RK4 on a uniform grid of n_steps intervals. n_steps >= 10.
RiccatiTable riccati_ode_solve(const LqParams& params, std::size_t n_steps);

/// Analytic equilibrium along one common-noise path W0 sampled at t_n = n h2.
class LqEquilibrium {
public:
    LqEquilibrium(const LqParams& params, std::vector<double> w0_path, double h2);

    /// u_{t_n} = E[X0] + rho sigma W0_{t_n}.
    double mean_field(std::size_t n) const;
    /// (q + eta_{t_n}) (u_{t_n} - x).
    double control(std::size_t n, double x) const;
    /// v(t, y) = eta_t y^2 / 2 + sigma^2 (1 - rho^2)/2 int_t^T eta ds, y = x - u.
    double value(double t, double y) const;
    double eta(double t) const { return riccati_closed_form(params_, t); }
    /// int_t^T eta ds by composite Simpson on 10^4 intervals.
    double eta_integral(double t) const;
    std::size_t steps() const { return w0_.size(); }

private:
    LqParams params_;
    std::vector<double> w0_;
    double h2_;
};

/// Two-dimensional example on Q = [0, 1]^2, U = [0, 1.5]^2:
///   b = 2x - alpha,  f = |4x - 5 ubar|^2 + |alpha|^2,  g = |4x - 5 ubar|^2,
///   sigma = 0.5 I, X0 ~ N((0, 1), 0.25 I) truncated to Q.
MfgProblem mfg2d_problem();

/// Representative starting point used in reports for the 2-D example.
inline Point mfg2d_x0() { return Point{0.4, 0.4}; }

/// Game with f = g = 0 and b = 0 on [0, 1]; used for degenerate checks.
MfgProblem null_problem(double sigma = 0.5);

}  // namespace hmfg
