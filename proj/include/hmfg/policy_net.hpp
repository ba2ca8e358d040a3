#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmfg/lattice.hpp"
#include "hmfg/policy.hpp"

namespace hmfg {

/// Feedforward tanh network N(t, y, theta) with a sigmoid output scaled into
/// the control box. Inputs are affinely mapped to [-1, 1] using the horizon
/// and `input_box`. theta is stored layer by layer, each layer as its
/// weight matrix (row-major, out x in) followed by its bias.
struct NetworkArchitecture {
    std::size_t state_dim = 1;
    std::size_t control_dim = 1;
    std::vector<std::size_t> hidden{32, 32};
    double horizon = 1.0;
    Box input_box;
    Box control_box;

    std::size_t input_dim() const { return state_dim + 1; }
    std::size_t parameter_count() const;
    void validate() const;

    friend bool operator==(const NetworkArchitecture&, const NetworkArchitecture&) = default;
};

/// Architecture for a problem: inputs are its policy coordinates.
NetworkArchitecture architecture_for(const MfgProblem& problem, std::vector<std::size_t> hidden);

/// Glorot-uniform weights and zero biases from `seed`.
ParameterVector initial_parameters(const NetworkArchitecture& arch, std::uint64_t seed);

Point forward(const NetworkArchitecture& arch, const ParameterVector& theta, double t, const Point& y);

/// N evaluated at the problem's policy coordinates of x under m.
ControlPolicy network_policy(const MfgProblem& problem, const NetworkArchitecture& arch, ParameterVector theta);

/// Least-squares targets (t, y) -> alpha, sorted canonically so the fit
/// does not depend on enumeration order.
struct FitData {
    std::vector<double> t;
    std::vector<Point> y;
    std::vector<Point> target;

    std::size_t size() const { return t.size(); }
    void canonicalize();
};

/// One sample per (time layer, node) of a grid control field, with the
/// node mapped to policy coordinates under m_path.
FitData make_fit_data(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                      const MeasurePath& m_path, const GridControlField& field);

/// sum over samples of |target - N(t, y, theta)|^2.
double fit_loss(const NetworkArchitecture& arch, const ParameterVector& theta, const FitData& data);

/// Exact gradient of fit_loss by backpropagation. Optionally returns the loss.
ParameterVector grad_fit_loss(const NetworkArchitecture& arch, const ParameterVector& theta, const FitData& data,
                              double* loss = nullptr);

struct FitOptions {
    /// Stop once the mean squared error per sample is at most this.
    double trigger = 1e-3;
    std::size_t max_steps = 10000;
    /// Returned parameters are clamped into [-bound, bound].
    double bound = 10.0;

    friend bool operator==(const FitOptions&, const FitOptions&) = default;
};

struct FitResult {
    ParameterVector theta;
    double mse = 0.0;
    std::size_t steps = 0;
    /// Loss after every accepted step, starting with the initial loss.
    std::vector<double> history;
};

/// Gradient descent with a Barzilai-Borwein trial step and Armijo
/// backtracking. Ends on the trigger, a stalled line search or max_steps.
FitResult fit_to_grid(const NetworkArchitecture& arch, const ParameterVector& theta0, const FitData& data,
                      const FitOptions& options = {});

/// Parameter checkpoint: CSV `index,value` with 17 significant digits, and
/// a `<path>.arch` sidecar describing the architecture.
void write_checkpoint(const std::string& path, const NetworkArchitecture& arch, const ParameterVector& theta);
ParameterVector read_parameters(const std::string& path);
NetworkArchitecture read_architecture(const std::string& path);

}  // namespace hmfg
