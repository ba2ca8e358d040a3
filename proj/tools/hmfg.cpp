#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hmfg/config.hpp"
#include "hmfg/error.hpp"
#include "hmfg/lq_check.hpp"
#include "hmfg/models.hpp"
#include "hmfg/policy_net.hpp"
#include "hmfg/rng.hpp"
#include "hmfg/simulate.hpp"
#include "hmfg/solver.hpp"
#include "hmfg/validation.hpp"

namespace fs = std::filesystem;
using namespace hmfg;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfigError = 2;

int cmd_solve(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out,
              bool resume, bool quiet, double time_budget) {
    RunConfig config = parse_config_file(config_path);
    if (seed) config.seed = *seed;
    if (!out.empty()) config.output = out;
    config.validate();

    SolveOptions options;
    options.resume = resume;
    options.time_budget_seconds = time_budget;
    if (!quiet)
        options.on_iteration = [](const IterationRecord& r) {
            std::fprintf(stderr, "k=%zu gap=%.4g (threshold %.4g) value_change=%.4g fit_mse=%.3g sa_steps=%zu G=%.6g\n",
                         r.k, r.gap, r.threshold, r.value_change, r.fit_mse, r.sa_steps, r.best_G);
            if (r.clamped_fraction > 0.01)
                std::fprintf(stderr, "warning: %.2f%% of chain transition mass was clamped at the lattice boundary\n",
                             100.0 * r.clamped_fraction);
        };
    const SolveResult result = run_algorithm1(config, options);
    write_outputs(result);
    std::fprintf(stderr, "stopped after %zu iterations (%s); outputs in %s\n", result.history.size(),
                 result.stop_reason.c_str(), config.output.c_str());
    return kOk;
}

int cmd_riccati(const std::string& params_path, std::size_t n_steps) {
    const LqParams params = params_path.empty() ? LqParams{} : parse_lq_params_file(params_path);
    if (n_steps < 1) throw Error(ErrorCode::ConfigError, "--steps must be positive");
    const std::size_t refine = 100;
    const RiccatiTable ode = riccati_ode_solve(params, std::max<std::size_t>(10, n_steps * refine));
    const std::size_t stride = ode.t.size() > n_steps ? (ode.t.size() - 1) / n_steps : 1;
    double worst = 0.0;
    std::printf("t,eta_closed_form,eta_ode,abs_diff\n");
    for (std::size_t i = 0; i < ode.t.size(); i += stride) {
        const double closed = riccati_closed_form(params, ode.t[i]);
        const double diff = std::abs(closed - ode.eta[i]);
        worst = std::max(worst, diff);
        std::printf("%s,%s,%s,%.3e\n", format_value(ode.t[i]).c_str(), format_value(closed).c_str(),
                    format_value(ode.eta[i]).c_str(), diff);
    }
    std::fprintf(stderr, "max |closed form - ODE| = %.3e\n", worst);
    return worst <= 1e-6 ? kOk : kFailed;
}

int cmd_validate() { return run_validation(std::cout) ? kOk : kFailed; }

int cmd_simulate(const std::string& checkpoint, std::string config_path, std::string out,
                 std::optional<std::uint64_t> seed, std::optional<std::size_t> n_particles) {
    const fs::path ck(checkpoint);
    if (config_path.empty()) config_path = (ck.parent_path() / "config.copy").string();
    RunConfig config = parse_config_file(config_path);
    if (seed) config.seed = *seed;
    if (n_particles) config.n_particles = *n_particles;
    if (out.empty()) out = (ck.parent_path() / "simulate").string();
    config.validate();

    const NetworkArchitecture arch = read_architecture(checkpoint);
    const ParameterVector theta = read_parameters(checkpoint);
    const MfgProblem problem = make_problem(config);
    if (arch != architecture_for(problem, arch.hidden))
        throw Error(ErrorCode::ConfigError, "checkpoint architecture does not fit model '" + config.model + "'");
    const StepSizes steps = StepSizes::make(problem.horizon, spacing_for(problem.domain, config.coarse_nodes), config.h2);
    fs::create_directories(out);

    const PathBundle paths = simulate_sde(problem, network_policy(problem, arch, theta), {}, steps,
                                          SdeOptions{config.n_particles, config.seed, true, true});
    std::FILE* f = std::fopen((fs::path(out) / "paths.csv").c_str(), "w");
    if (!f) throw Error(ErrorCode::IoError, "cannot write into '" + out + "'");
    std::fprintf(f, "path,t");
    for (std::size_t j = 0; j < problem.state_dim; ++j) std::fprintf(f, ",x%zu", j + 1);
    for (std::size_t j = 0; j < problem.control_dim; ++j) std::fprintf(f, ",a%zu", j + 1);
    std::fprintf(f, paths.common_noise.empty() ? "\n" : ",w0\n");
    for (std::size_t p = 0; p < std::min(config.report_paths, paths.n_paths); ++p)
        for (std::size_t n = 0; n < paths.n_times(); ++n) {
            std::fprintf(f, "%zu,%s", p, format_value(paths.times[n]).c_str());
            for (std::size_t j = 0; j < problem.state_dim; ++j)
                std::fprintf(f, ",%s", format_value(paths.state(p, n)[j]).c_str());
            for (std::size_t j = 0; j < problem.control_dim; ++j)
                std::fprintf(f, ",%s", format_value(paths.control(p, n)[j]).c_str());
            if (!paths.common_noise.empty()) std::fprintf(f, ",%s", format_value(paths.common_noise[n]).c_str());
            std::fprintf(f, "\n");
        }
    std::fclose(f);

    if (config.model == "lq") {
        const auto scenarios =
            compare_lq(config.lq, config.lq_box, arch, theta, steps, config.n_particles, config.scenarios, config.seed);
        write_lq_trajectories((fs::path(out) / "lq_trajectories.csv").string(), scenarios, config.lq,
                              config.report_paths);
        for (std::size_t s = 0; s < scenarios.size(); ++s)
            std::printf("scenario %zu: control_error=%.4g mean_error=%.4g state_error=%.4g\n", s,
                        scenarios[s].control_error, scenarios[s].mean_error, scenarios[s].state_error);
    }
    std::fprintf(stderr, "wrote %s\n", out.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid lattice / stochastic-approximation solver for finite-horizon mean-field games"};
    app.require_subcommand(1);

    std::string config_path, out, params_path, checkpoint;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_particles;
    bool resume = false, quiet = false;
    double time_budget = 0.0;
    std::size_t riccati_steps = 100;

    auto* solve = app.add_subcommand("solve", "run the iteration and write all outputs");
    solve->add_option("--config", config_path, "INI run configuration")->required();
    solve->add_option("--seed", seed, "override simulation.seed");
    solve->add_option("--out", out, "override simulation.output");
    solve->add_flag("--resume", resume, "continue from <out>/state when present");
    solve->add_flag("--quiet", quiet, "no per-iteration progress");
    solve->add_option("--time-budget", time_budget, "stop after the iteration that passes this many seconds");

    auto* riccati = app.add_subcommand("riccati", "print the LQ Riccati table, closed form vs ODE");
    riccati->add_option("--params", params_path, "INI file with a [model] section");
    riccati->add_option("--steps", riccati_steps, "table rows minus one");

    auto* validate = app.add_subcommand("validate", "run the numerical self-checks");

    auto* simulate = app.add_subcommand("simulate", "roll out a saved policy");
    simulate->add_option("--checkpoint", checkpoint, "theta CSV written by solve")->required();
    simulate->add_option("--config", config_path, "run configuration (default: config.copy next to the checkpoint)");
    simulate->add_option("--out", out, "output directory (default: <checkpoint dir>/simulate)");
    simulate->add_option("--seed", seed, "override simulation.seed");
    simulate->add_option("--particles", n_particles, "override simulation.n_particles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*solve) return cmd_solve(config_path, seed, out, resume, quiet, time_budget);
        if (*riccati) return cmd_riccati(params_path, riccati_steps);
        if (*validate) return cmd_validate();
        if (*simulate) return cmd_simulate(checkpoint, config_path, out, seed, n_particles);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == ErrorCode::ConfigError ? kConfigError : kFailed;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailed;
    }
    return kOk;
}
