#include "hmfg/models.hpp"

#include <cmath>
#include <string>

#include "hmfg/error.hpp"

namespace hmfg {

void LqParams::validate() const {
    if (!(epsilon - q * q > 0.0)) throw Error(ErrorCode::InvalidParams, "epsilon - q^2 must be positive");
    if (!(c >= 0.0)) throw Error(ErrorCode::InvalidParams, "c must be nonnegative");
    if (!(rho >= -1.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidParams, "rho must lie in [-1, 1]");
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidParams, "sigma must be positive");
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidParams, "T must be positive");
    for (double v : {a, q, c, epsilon, rho, sigma, T})
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParams, "non-finite LQ parameter");
}

MfgProblem lq_problem(const LqParams& p, const LqOptions& options) {
    p.validate();
    if (!(options.lower < kLqInitialMean && options.upper > kLqInitialMean))
        throw Error(ErrorCode::InvalidParams, "LQ truncation box must contain the initial mean");
    if (!(options.control_bound > 0.0)) throw Error(ErrorCode::InvalidParams, "control bound must be positive");

    MfgProblem pr;
    pr.name = "lq";
    pr.state_dim = 1;
    pr.control_dim = 1;
    pr.domain = Box{Point{options.lower}, Point{options.upper}};
    pr.bounded = false;
    pr.controls = Box{Point{-options.control_bound}, Point{options.control_bound}};
    pr.horizon = p.T;
    pr.common_noise = p.rho;

    pr.drift = [p](double, const Point& x, const EmpiricalMeasure& m, const Point& a) {
        return Point{p.a * (m.mean()[0] - x[0]) + a[0]};
    };
    pr.diffusion = [p](double, const Point&) { return SmallMatrix::diagonal(1, p.sigma); };
    pr.running_cost = [p](double, const Point& x, const EmpiricalMeasure& m, const Point& a) {
        const double gap = m.mean()[0] - x[0];
        return 0.5 * a[0] * a[0] - p.q * a[0] * gap + 0.5 * p.epsilon * gap * gap;
    };
    pr.terminal_cost = [p](const Point& x, const EmpiricalMeasure& m) {
        const double gap = m.mean()[0] - x[0];
        return 0.5 * p.c * gap * gap;
    };
    pr.sample_initial = [](Rng& rng) { return Point{rng.uniform()}; };
    pr.policy_state = [](const Point& x, const EmpiricalMeasure& m) { return Point{x[0] - m.mean()[0]}; };
    pr.policy_box = Box{Point{options.lower - kLqInitialMean}, Point{options.upper - kLqInitialMean}};
    return pr;
}

namespace {

void check_riccati(const LqParams& p) {
    if (!(p.epsilon - p.q * p.q >= 0.0) || !(p.T > 0.0) || !(p.c >= 0.0))
        throw Error(ErrorCode::InvalidParams, "Riccati needs epsilon >= q^2, c >= 0, T > 0");
}

double riccati_rhs(const LqParams& p, double eta) {
    return 2.0 * (p.a + p.q) * eta + eta * eta - (p.epsilon - p.q * p.q);
}

}  // namespace

double riccati_closed_form(const LqParams& p, double t) {
    check_riccati(p);
    if (!(t >= 0.0 && t <= p.T))
        throw Error(ErrorCode::OutOfHorizon, "t = " + std::to_string(t) + " outside [0, T]");
    if (t == p.T) return p.c;
    const double k = p.epsilon - p.q * p.q;
    const double sqrt_r = std::sqrt((p.a + p.q) * (p.a + p.q) + k);
    const double dplus = -(p.a + p.q) + sqrt_r;
    const double dminus = -(p.a + p.q) - sqrt_r;
    const double e = std::exp((dplus - dminus) * (p.T - t));
    const double den = (dminus * e - dplus) - p.c * (e - 1.0);
    return (-k * (e - 1.0) - p.c * (dplus * e - dminus)) / den;
}

RiccatiTable riccati_ode_solve(const LqParams& p, std::size_t n_steps) {
    check_riccati(p);
    if (n_steps < 10) throw Error(ErrorCode::InvalidParams, "Riccati solve needs at least 10 steps");
    const double h = p.T / static_cast<double>(n_steps);
    RiccatiTable out;
    out.t.resize(n_steps + 1);
    out.eta.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) out.t[i] = p.T * static_cast<double>(i) / static_cast<double>(n_steps);
    out.t[n_steps] = p.T;
    double eta = p.c;
    out.eta[n_steps] = eta;
    // Integrate in reversed time s = T - t, where d eta / ds = -rhs.
    for (std::size_t i = n_steps; i-- > 0;) {
        const double k1 = -riccati_rhs(p, eta);
        const double k2 = -riccati_rhs(p, eta + 0.5 * h * k1);
        const double k3 = -riccati_rhs(p, eta + 0.5 * h * k2);
        const double k4 = -riccati_rhs(p, eta + h * k3);
        eta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.eta[i] = eta;
    }
    return out;
}

LqEquilibrium::LqEquilibrium(const LqParams& params, std::vector<double> w0_path, double h2)
    : params_(params), w0_(std::move(w0_path)), h2_(h2) {
    check_riccati(params_);
    if (!(h2 > 0.0)) throw Error(ErrorCode::InvalidParams, "time step must be positive");
}

double LqEquilibrium::mean_field(std::size_t n) const {
    if (n >= w0_.size()) throw Error(ErrorCode::OutOfHorizon, "time index beyond the common-noise path");
    return kLqInitialMean + params_.rho * params_.sigma * w0_[n];
}

double LqEquilibrium::control(std::size_t n, double x) const {
    const double t = std::min(params_.T, static_cast<double>(n) * h2_);
    return (params_.q + eta(t)) * (mean_field(n) - x);
}

double LqEquilibrium::eta_integral(double t) const {
    if (!(t >= 0.0 && t <= params_.T)) throw Error(ErrorCode::OutOfHorizon, "t outside [0, T]");
    constexpr std::size_t n = 10000;
    const double h = (params_.T - t) / static_cast<double>(n);
    if (h == 0.0) return 0.0;
    double s = eta(t) + eta(params_.T);
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * eta(std::min(params_.T, t + h * static_cast<double>(i)));
    return s * h / 3.0;
}

double LqEquilibrium::value(double t, double y) const {
    return 0.5 * eta(t) * y * y +
           0.5 * params_.sigma * params_.sigma * (1.0 - params_.rho * params_.rho) * eta_integral(t);
}

MfgProblem mfg2d_problem() {
    MfgProblem pr;
    pr.name = "mfg2d";
    pr.state_dim = 2;
    pr.control_dim = 2;
    pr.domain = Box{Point{0.0, 0.0}, Point{1.0, 1.0}};
    pr.bounded = true;
    pr.controls = Box{Point{0.0, 0.0}, Point{1.5, 1.5}};
    pr.horizon = 1.0;
    pr.common_noise = 0.0;

    pr.drift = [](double, const Point& x, const EmpiricalMeasure&, const Point& a) {
        return Point{2.0 * x[0] - a[0], 2.0 * x[1] - a[1]};
    };
    pr.diffusion = [](double, const Point&) { return SmallMatrix::diagonal(2, 0.5); };
    auto target_gap = [](const Point& x, const EmpiricalMeasure& m) {
        const Point& u = m.mean();
        const double d0 = 4.0 * x[0] - 5.0 * u[0];
        const double d1 = 4.0 * x[1] - 5.0 * u[1];
        return d0 * d0 + d1 * d1;
    };
    pr.running_cost = [target_gap](double, const Point& x, const EmpiricalMeasure& m, const Point& a) {
        return target_gap(x, m) + a.squared_norm();
    };
    pr.terminal_cost = target_gap;
    pr.sample_initial = [](Rng& rng) {
        for (;;) {
            const double x0 = 0.0 + 0.5 * rng.normal();
            const double x1 = 1.0 + 0.5 * rng.normal();
            if (x0 >= 0.0 && x0 <= 1.0 && x1 >= 0.0 && x1 <= 1.0) return Point{x0, x1};
        }
    };
    pr.policy_box = pr.domain;
    return pr;
}

MfgProblem null_problem(double sigma) {
    MfgProblem pr;
    pr.name = "null";
    pr.state_dim = 1;
    pr.control_dim = 1;
    pr.domain = Box{Point{0.0}, Point{1.0}};
    pr.controls = Box{Point{0.0}, Point{1.0}};
    pr.drift = [](double, const Point&, const EmpiricalMeasure&, const Point&) { return Point{0.0}; };
    pr.diffusion = [sigma](double, const Point&) { return SmallMatrix::diagonal(1, sigma); };
    pr.running_cost = [](double, const Point&, const EmpiricalMeasure&, const Point&) { return 0.0; };
    pr.terminal_cost = [](const Point&, const EmpiricalMeasure&) { return 0.0; };
    pr.sample_initial = [](Rng& rng) { return Point{rng.uniform()}; };
    pr.policy_box = pr.domain;
    return pr;
}

}  // namespace hmfg
