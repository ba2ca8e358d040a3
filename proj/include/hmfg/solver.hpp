#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hmfg/config.hpp"
#include "hmfg/lattice.hpp"
#include "hmfg/policy_net.hpp"
#include "hmfg/sa.hpp"

namespace hmfg {

/// Diagnostics of one outer iteration.
struct IterationRecord {
    std::size_t k = 0;
    double gap = 0.0;        // max_t W2^2(Phi(m_bar^(k-1)), m_bar^(k-1))
    double threshold = 0.0;  // 2q/(1-q) h1^2 on the coarse lattice
    double value_change = 0.0;
    double fit_mse = 0.0;
    std::size_t fit_steps = 0;
    std::size_t sa_steps = 0;
    double best_G = 0.0;
    double clamped_fraction = 0.0;
};

struct PhaseTimes {
    double dp = 0.0;
    double simulate = 0.0;
    double average = 0.0;
    double fit = 0.0;
    double sa = 0.0;
    double value = 0.0;
    double total = 0.0;
};

struct SolveResult {
    RunConfig config;
    MfgProblem problem;
    NetworkArchitecture arch;
    ParameterVector theta;
    Lattice coarse;
    Lattice fine;
    StepSizes coarse_steps;
    StepSizes fine_steps;
    MeasurePath m_bar;
    ValueTable value_coarse;
    ValueTable value_fine;
    /// Last grid-search control field from the coarse dynamic program.
    GridControlField mcam_controls;
    std::vector<IterationRecord> history;
    std::string stop_reason;  // "value", "w2", "both", "max_iterations", "time_budget"
    bool value_converged = false;
    bool w2_converged = false;
    /// Iteration at which the W2 gap first fell below its threshold (0: never).
    std::size_t first_w2_below = 0;
    PhaseTimes times;
};

struct SolveOptions {
    /// Continue from `<output>/state` when it exists.
    bool resume = false;
    /// Write traces, checkpoints and state into `config.output` while running.
    bool write_files = true;
    std::function<void(const IterationRecord&)> on_iteration;
    /// Stop after the first iteration that ends past this many seconds of
    /// wall time (0: no limit). Such runs report stop_reason "time_budget".
    double time_budget_seconds = 0.0;
};

/// Grid spacing giving `nodes` points per axis. Throws ConfigError when the
/// box axes have different lengths.
double spacing_for(const Box& box, std::size_t nodes);

/// Runs the hybrid iteration: coarse grid-search DP, induced law, averaging,
/// network fit, stochastic-approximation refinement and value updates on both
/// lattices, until the configured stop rule holds or the budget runs out.
/// Errors from inner modules are rethrown with the iteration index attached.
SolveResult run_algorithm1(const RunConfig& config, const SolveOptions& options = {});

/// Final tables, measures, sample paths and reports into `config.output`.
void write_outputs(const SolveResult& result);

/// Twelve significant digits, the precision of every emitted table.
std::string format_value(double v);

}  // namespace hmfg
