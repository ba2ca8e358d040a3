#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmfg/models.hpp"
#include "hmfg/policy_net.hpp"
#include "hmfg/sa.hpp"

namespace hmfg {

/// Everything a `solve` run needs. Read from an INI file with sections
/// [model], [lattice], [network], [fit], [sa], [iteration], [simulation].
struct RunConfig {
    // [model]
    std::string model;  // "lq" | "mfg2d" | "null" (f = g = 0, b = 0, diffusion model.sigma)
    LqParams lq;
    LqOptions lq_box;

    // [lattice]
    double h2 = 0.01;
    std::size_t coarse_nodes = 6;  // per axis, Step 1 and Step 4
    std::size_t fine_nodes = 21;   // per axis, Steps 5 and 7
    std::size_t control_points = 16;

    // [network]
    std::vector<std::size_t> hidden{32, 32};

    // [fit]
    FitOptions fit;

    // [sa]
    SaSchedule sa;
    double band = 0.5;
    std::string evaluator = "mc";  // "mc" | "exact"
    std::size_t n_mc = 100;

    // [iteration]
    double value_trigger = 1e-6;
    std::size_t max_iterations = 50000;
    double q = 0.5;
    std::string stop_rule = "value";  // "value" | "w2" | "either" | "both"
    std::size_t w2_atoms = 256;
    std::string initial_measure = "uncontrolled";  // "uncontrolled" | "initial"

    // [simulation]
    std::size_t n_particles = 1000;
    std::size_t max_atoms = 0;  // 0: n_particles
    std::size_t report_paths = 20;
    std::size_t scenarios = 3;
    std::uint64_t seed = 1;
    std::string output = "out";

    /// Throws ConfigError on inconsistent values.
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ConfigError naming the offending key, or the file when it cannot
/// be read.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);
/// INI text that parses back to an equal RunConfig.
std::string serialize_config(const RunConfig& config);

/// LQ parameters from the [model] section of an INI file (a, q, c, epsilon,
/// rho, sigma, T). Absent keys keep their defaults and other keys are
/// ignored, so a full run config works too.
LqParams parse_lq_params_file(const std::string& path);

/// The problem a config describes.
MfgProblem make_problem(const RunConfig& config);

}  // namespace hmfg
