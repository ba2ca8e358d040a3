#include "hmfg/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hmfg/error.hpp"
#include "hmfg/lq_check.hpp"
#include "hmfg/policy.hpp"
#include "hmfg/rng.hpp"
#include "hmfg/simulate.hpp"

namespace hmfg {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kInitialStream = 0x1417;
constexpr std::uint64_t kUncontrolledStream = 0x0c0a;
constexpr std::uint64_t kChainStream = 0xc4a1;
constexpr std::uint64_t kAverageStream = 0xa7e2;
constexpr std::uint64_t kNetworkStream = 0x4e7;
constexpr std::uint64_t kSaStream = 0x5a;
constexpr std::uint64_t kPathStream = 0x9a7;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream f(path, mode);
    if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    return f;
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

/// Smallest integer refinement r with (h2 / r) * rate <= 1.
std::size_t refinement(double rate, double h2) {
    const double need = rate * h2;
    if (need <= 1.0 + 1e-12) return 1;
    return static_cast<std::size_t>(std::ceil(need - 1e-12));
}

MeasurePath sample_initial_law(const MfgProblem& problem, std::size_t n, std::uint64_t seed) {
    Rng rng(stream_seed(seed, kInitialStream));
    std::vector<Point> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(problem.domain.clamp(problem.sample_initial(rng)));
    return {compact(EmpiricalMeasure::uniform(std::move(xs)))};
}

ValueTable terminal_fill(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                         const MeasurePath& m_path) {
    ValueTable v(steps.n_time + 1, lattice.size());
    const EmpiricalMeasure& m_T = measure_at(m_path, steps, steps.n_time);
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        const double g = problem.terminal_cost(lattice.node(i), m_T);
        for (std::size_t n = 0; n <= steps.n_time; ++n) v.at(n, i) = g;
    }
    return v;
}

json record_json(const IterationRecord& r) {
    return json{{"k", r.k},
                {"gap", r.gap},
                {"threshold", r.threshold},
                {"value_change", r.value_change},
                {"fit_mse", r.fit_mse},
                {"fit_steps", r.fit_steps},
                {"sa_steps", r.sa_steps},
                {"best_G", r.best_G},
                {"clamped_fraction", r.clamped_fraction}};
}

IterationRecord record_from(const json& j) {
    IterationRecord r;
    r.k = j.at("k").get<std::size_t>();
    r.gap = j.at("gap").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.value_change = j.at("value_change").get<double>();
    r.fit_mse = j.at("fit_mse").get<double>();
    r.fit_steps = j.at("fit_steps").get<std::size_t>();
    r.sa_steps = j.at("sa_steps").get<std::size_t>();
    r.best_G = j.at("best_G").get<double>();
    r.clamped_fraction = j.at("clamped_fraction").get<double>();
    return r;
}

// ---- exact-precision state files for resume ----

void write_measure_state(const fs::path& path, const MeasurePath& m) {
    auto f = open_out(path);
    for (std::size_t n = 0; n < m.size(); ++n)
        for (std::size_t a = 0; a < m[n].size(); ++a) {
            f << n << ',' << fmt17(m[n].weights()[a]);
            for (std::size_t j = 0; j < m[n].dim(); ++j) f << ',' << fmt17(m[n].particles()[a][j]);
            f << '\n';
        }
}

MeasurePath read_measure_state(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<Point>> xs;
    std::vector<std::vector<double>> ws;
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        const std::size_t n = std::stoull(cell);
        std::getline(ls, cell, ',');
        const double w = std::stod(cell);
        std::vector<double> coords;
        while (std::getline(ls, cell, ',')) coords.push_back(std::stod(cell));
        Point x(coords.size());
        for (std::size_t j = 0; j < coords.size(); ++j) x[j] = coords[j];
        if (n >= xs.size()) {
            xs.resize(n + 1);
            ws.resize(n + 1);
        }
        xs[n].push_back(x);
        ws[n].push_back(w);
    }
    MeasurePath out;
    for (std::size_t n = 0; n < xs.size(); ++n) out.emplace_back(std::move(xs[n]), std::move(ws[n]));
    return out;
}

void write_values_state(const fs::path& path, const ValueTable& v) {
    auto f = open_out(path);
    f << v.layers() << ',' << v.nodes() << '\n';
    for (double x : v.values()) f << fmt17(x) << '\n';
}

ValueTable read_values_state(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    const auto comma = line.find(',');
    ValueTable v(std::stoull(line.substr(0, comma)), std::stoull(line.substr(comma + 1)));
    for (double& x : v.values()) {
        if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "truncated value state '" + path.string() + "'");
        x = std::stod(line);
    }
    return v;
}

void write_controls_state(const fs::path& path, const GridControlField& c) {
    auto f = open_out(path);
    f << c.layers() << ',' << c.nodes() << '\n';
    for (const Point& a : c.controls()) {
        for (std::size_t j = 0; j < a.size(); ++j) f << (j ? "," : "") << fmt17(a[j]);
        f << '\n';
    }
}

GridControlField read_controls_state(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    const auto comma = line.find(',');
    const std::size_t layers = std::stoull(line.substr(0, comma));
    const std::size_t nodes = std::stoull(line.substr(comma + 1));
    GridControlField c(layers, nodes, Point{});
    for (std::size_t n = 0; n < layers; ++n)
        for (std::size_t i = 0; i < nodes; ++i) {
            if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "truncated control state");
            std::stringstream ls(line);
            std::string cell;
            std::vector<double> v;
            while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
            Point a(v.size());
            for (std::size_t j = 0; j < v.size(); ++j) a[j] = v[j];
            c.at(n, i) = a;
        }
    return c;
}

/// Keeps the JSON-lines records whose "k" is at most k_max.
void truncate_trace(const fs::path& path, std::size_t k_max) {
    if (!fs::exists(path)) return;
    std::istringstream in(read_file(path));
    std::string kept, line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (json::parse(line).at("k").get<std::size_t>() <= k_max) kept += line + "\n";
    }
    open_out(path) << kept;
}

/// Every config field except the budget and the output location must match
/// for a resume to continue the same computation.
bool resumable_from(const RunConfig& saved, const RunConfig& now) {
    RunConfig a = saved, b = now;
    a.max_iterations = b.max_iterations = 1;
    a.output = b.output = "";
    return a == b;
}

std::string strip_code(const Error& e) {
    const std::string what = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

bool stop_now(const std::string& rule, bool value_ok, bool w2_ok) {
    if (rule == "value") return value_ok;
    if (rule == "w2") return w2_ok;
    if (rule == "either") return value_ok || w2_ok;
    return value_ok && w2_ok;
}

}  // namespace

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

double spacing_for(const Box& box, std::size_t nodes) {
    if (nodes < 2) throw Error(ErrorCode::ConfigError, "a lattice needs at least 2 nodes per axis");
    const double length = box.upper[0] - box.lower[0];
    for (std::size_t i = 1; i < box.dim(); ++i)
        if (std::abs((box.upper[i] - box.lower[i]) - length) > 1e-12 * std::max(1.0, length))
            throw Error(ErrorCode::ConfigError, "node counts need a domain with equal axis lengths");
    return length / static_cast<double>(nodes - 1);
}

SolveResult run_algorithm1(const RunConfig& config, const SolveOptions& options) {
    const auto t_start = Clock::now();
    config.validate();

    SolveResult r;
    r.config = config;
    r.problem = make_problem(config);
    r.problem.validate();
    const MfgProblem& problem = r.problem;

    const double h1c = spacing_for(problem.domain, config.coarse_nodes);
    const double h1f = spacing_for(problem.domain, config.fine_nodes);
    r.coarse = Lattice::over(problem.domain, h1c);
    r.fine = Lattice::over(problem.domain, h1f);
    const ControlGrid grid = make_control_grid(problem.controls, config.control_points);

    // Refine the time step where the configured h2 would give a negative
    // self-loop probability. The fine refinement is a multiple of the coarse
    // one so the measure path (coarse time grid) can be read on both.
    const MeasurePath m_init = sample_initial_law(problem, config.n_particles, config.seed);
    const StepSizes base_c = StepSizes::make(problem.horizon, h1c, config.h2);
    const StepSizes base_f = StepSizes::make(problem.horizon, h1f, config.h2);
    const std::size_t rc = refinement(max_jump_rate(problem, r.coarse, base_c, m_init, grid), config.h2);
    std::size_t rf = refinement(max_jump_rate(problem, r.fine, base_f, m_init, grid), config.h2);
    rf = ((rf + rc - 1) / rc) * rc;
    r.coarse_steps = StepSizes::make(problem.horizon, h1c, config.h2 / static_cast<double>(rc));
    r.fine_steps = StepSizes::make(problem.horizon, h1f, config.h2 / static_cast<double>(rf));
    const StepSizes& cs = r.coarse_steps;
    const StepSizes& fs_ = r.fine_steps;

    r.arch = architecture_for(problem, config.hidden);
    const ParameterVector theta_init = initial_parameters(r.arch, stream_seed(config.seed, kNetworkStream));
    const double threshold = fixed_point_threshold(config.q, h1c);
    const AverageOptions avg{config.max_atoms > 0 ? config.max_atoms : config.n_particles,
                             stream_seed(config.seed, kAverageStream)};

    const fs::path out_dir = config.output;
    const fs::path state_dir = out_dir / "state";
    std::size_t k_done = 0;
    ValueTable v_prev;
    bool finished = false;

    if (options.resume && fs::exists(state_dir / "state.json")) {
        const json state = json::parse(read_file(state_dir / "state.json"));
        const RunConfig saved = parse_config_text(state.at("config").get<std::string>());
        if (!resumable_from(saved, config))
            throw Error(ErrorCode::ConfigError, "saved state in '" + state_dir.string() +
                                                    "' was produced by a different configuration");
        k_done = state.at("k").get<std::size_t>();
        for (const auto& j : state.at("history")) r.history.push_back(record_from(j));
        r.first_w2_below = state.at("first_w2_below").get<std::size_t>();
        r.stop_reason = state.at("stop_reason").get<std::string>();
        finished = !r.stop_reason.empty() && r.stop_reason != "max_iterations" && r.stop_reason != "time_budget";
        r.theta = read_parameters((state_dir / "theta.csv").string());
        r.m_bar = read_measure_state(state_dir / "m_bar.csv");
        r.value_fine = read_values_state(state_dir / "v_fine.csv");
        r.value_coarse = read_values_state(state_dir / "v_coarse.csv");
        r.mcam_controls = read_controls_state(state_dir / "mcam_controls.csv");
        v_prev = r.value_fine;
        if (options.write_files) {
            truncate_trace(out_dir / "trace_sa.jsonl", k_done);
            truncate_trace(out_dir / "trace_fixedpoint.jsonl", k_done);
        }
    } else {
        if (config.initial_measure == "initial") {
            r.m_bar.assign(cs.n_time + 1, m_init.front());
        } else {
            r.m_bar = induced_measure(problem, r.coarse, cs, constant_policy(problem.controls.midpoint()), m_init,
                                      config.n_particles, stream_seed(config.seed, kUncontrolledStream));
        }
        v_prev = terminal_fill(problem, r.fine, fs_, r.m_bar);
        r.value_fine = v_prev;
        r.value_coarse = terminal_fill(problem, r.coarse, cs, r.m_bar);
        r.theta = theta_init;
        if (options.write_files) {
            fs::create_directories(out_dir);
            open_out(out_dir / "trace_sa.jsonl");
            open_out(out_dir / "trace_fixedpoint.jsonl");
        }
    }
    if (options.write_files) {
        fs::create_directories(state_dir);
        open_out(out_dir / "config.copy") << serialize_config(config);
    }

    for (std::size_t k = k_done + 1; !finished && k <= config.max_iterations; ++k) {
        IterationRecord rec;
        rec.k = k;
        rec.threshold = threshold;
        try {
            // Step 1: grid-search DP on the coarse lattice under m_bar^(k-1).
            auto t0 = Clock::now();
            const DpResult dp = dp_backward_sweep(problem, r.coarse, cs, r.m_bar, grid);
            r.mcam_controls = dp.controls;
            r.times.dp += seconds_since(t0);

            // Step 2: law of the chain under the DP control.
            t0 = Clock::now();
            ChainStats stats;
            const MeasurePath m_k = induced_measure(problem, r.coarse, cs, grid_policy(r.coarse, cs, dp.controls),
                                                    r.m_bar, config.n_particles,
                                                    stream_seed(config.seed, kChainStream), &stats);
            rec.clamped_fraction = stats.clamped_fraction;
            rec.gap = fixed_point_gap(m_k, r.m_bar, config.w2_atoms);
            r.times.simulate += seconds_since(t0);

            // Step 4 inputs are taken under the measure the DP used.
            const FitData data = make_fit_data(problem, r.coarse, cs, r.m_bar, dp.controls);

            // Step 3: averaging.
            t0 = Clock::now();
            r.m_bar = average_update(r.m_bar, m_k, k, avg);
            r.times.average += seconds_since(t0);

            // Step 4: fit the network to the grid control.
            t0 = Clock::now();
            const FitResult fit = fit_to_grid(r.arch, theta_init, data, config.fit);
            rec.fit_mse = fit.mse;
            rec.fit_steps = fit.steps;
            r.times.fit += seconds_since(t0);

            // Step 5: stochastic approximation on the fine lattice.
            t0 = Clock::now();
            const ProjectionRegion region(config.fit.bound, config.band, r.arch, fit.theta, data);
            ImprovementContext ctx{&problem, r.fine, fs_, r.m_bar, r.arch};
            ImprovementFn G;
            if (config.evaluator == "exact")
                G = [&ctx](const ParameterVector& th, std::uint64_t) { return exact_improvement(ctx, th); };
            else
                G = [&ctx, n = config.n_mc](const ParameterVector& th, std::uint64_t s) {
                    return improvement(ctx, th, n, s);
                };
            const TrainResult trained = train(fit.theta, config.sa, region, G, stream_seed(config.seed, kSaStream));
            r.theta = trained.theta;
            rec.sa_steps = trained.steps;
            rec.best_G = trained.best_G;
            r.times.sa += seconds_since(t0);

            if (options.write_files) {
                auto f = open_out(out_dir / "trace_sa.jsonl", std::ios::app);
                for (const auto& s : trained.trace)
                    f << json{{"k", k},           {"l", s.l},
                              {"G", s.G},         {"eps", s.eps},
                              {"delta", s.delta}, {"grad_norm", s.grad_norm},
                              {"projected", s.projected}}
                             .dump()
                      << '\n';
            }

            // Steps 6-7: value of the network control on both lattices.
            t0 = Clock::now();
            const ControlPolicy policy = network_policy(problem, r.arch, r.theta);
            r.value_coarse = evaluate_controls(problem, r.coarse, cs, r.m_bar,
                                               tabulate_policy(problem, r.coarse, cs, r.m_bar, policy));
            r.value_fine = evaluate_controls(problem, r.fine, fs_, r.m_bar,
                                             tabulate_policy(problem, r.fine, fs_, r.m_bar, policy));
            r.times.value += seconds_since(t0);
        } catch (const Error& e) {
            throw Error(e.code(), "iteration " + std::to_string(k) + ": " + strip_code(e));
        }

        // Step 8.
        double change = 0.0;
        for (std::size_t j = 0; j < v_prev.values().size(); ++j) {
            const double d = r.value_fine.values()[j] - v_prev.values()[j];
            change += d * d;
        }
        rec.value_change = change;
        v_prev = r.value_fine;
        r.history.push_back(rec);

        const bool value_ok = change < config.value_trigger;
        const bool w2_ok = rec.gap <= threshold;
        if (w2_ok && r.first_w2_below == 0) r.first_w2_below = k;
        if (stop_now(config.stop_rule, value_ok, w2_ok)) {
            finished = true;
            r.stop_reason = value_ok && w2_ok ? "both" : (value_ok ? "value" : "w2");
        } else if (k == config.max_iterations) {
            r.stop_reason = "max_iterations";
        } else if (options.time_budget_seconds > 0.0 && seconds_since(t_start) > options.time_budget_seconds) {
            finished = true;
            r.stop_reason = "time_budget";
        }

        if (options.write_files) {
            open_out(out_dir / "trace_fixedpoint.jsonl", std::ios::app) << record_json(rec).dump() << '\n';
            char name[64];
            std::snprintf(name, sizeof name, "theta_checkpoint_k%zu.csv", k);
            write_checkpoint((out_dir / name).string(), r.arch, r.theta);

            write_checkpoint((state_dir / "theta.csv").string(), r.arch, r.theta);
            write_measure_state(state_dir / "m_bar.csv", r.m_bar);
            write_values_state(state_dir / "v_fine.csv", r.value_fine);
            write_values_state(state_dir / "v_coarse.csv", r.value_coarse);
            write_controls_state(state_dir / "mcam_controls.csv", r.mcam_controls);
            json history = json::array();
            for (const auto& h : r.history) history.push_back(record_json(h));
            // state.json last: its presence marks a complete snapshot.
            open_out(state_dir / "state.json") << json{{"k", k},
                                                       {"config", serialize_config(config)},
                                                       {"first_w2_below", r.first_w2_below},
                                                       {"stop_reason", r.stop_reason},
                                                       {"history", history}}
                                                      .dump(1)
                                               << '\n';
        }
        if (options.on_iteration) options.on_iteration(rec);
    }

    if (!r.history.empty()) {
        r.value_converged = r.history.back().value_change < config.value_trigger;
        r.w2_converged = r.history.back().gap <= threshold;
    }
    if (r.stop_reason.empty()) r.stop_reason = "max_iterations";
    r.times.total = seconds_since(t_start);
    return r;
}

namespace {

void write_grid_values(const fs::path& path, const Lattice& lattice, const StepSizes& steps, const ValueTable& v) {
    auto f = open_out(path);
    f << "t";
    for (std::size_t j = 0; j < lattice.dim(); ++j) f << ",x" << j + 1;
    f << ",value\n";
    for (std::size_t n = 0; n < v.layers(); ++n)
        for (std::size_t i = 0; i < v.nodes(); ++i) {
            const Point x = lattice.node(i);
            f << format_value(steps.time(n));
            for (std::size_t j = 0; j < x.size(); ++j) f << ',' << format_value(x[j]);
            f << ',' << format_value(v.at(n, i)) << '\n';
        }
}

void write_grid_controls(const fs::path& path, const Lattice& lattice, const StepSizes& steps,
                         const GridControlField& c) {
    auto f = open_out(path);
    f << "t";
    for (std::size_t j = 0; j < lattice.dim(); ++j) f << ",x" << j + 1;
    const std::size_t k = c.controls().empty() ? 0 : c.controls().front().size();
    for (std::size_t j = 0; j < k; ++j) f << ",a" << j + 1;
    f << '\n';
    for (std::size_t n = 0; n < c.layers(); ++n)
        for (std::size_t i = 0; i < c.nodes(); ++i) {
            const Point x = lattice.node(i);
            f << format_value(steps.time(n));
            for (std::size_t j = 0; j < x.size(); ++j) f << ',' << format_value(x[j]);
            for (std::size_t j = 0; j < k; ++j) f << ',' << format_value(c.at(n, i)[j]);
            f << '\n';
        }
}

}  // namespace

void write_outputs(const SolveResult& r) {
    const RunConfig& c = r.config;
    const fs::path out = c.output;
    fs::create_directories(out);
    open_out(out / "config.copy") << serialize_config(c);

    write_grid_values(out / "value_fine.csv", r.fine, r.fine_steps, r.value_fine);
    write_grid_values(out / "value_coarse.csv", r.coarse, r.coarse_steps, r.value_coarse);
    const ControlPolicy policy = network_policy(r.problem, r.arch, r.theta);
    write_grid_controls(out / "controls.csv", r.fine, r.fine_steps,
                        tabulate_policy(r.problem, r.fine, r.fine_steps, r.m_bar, policy));
    if (r.mcam_controls.layers() > 0)
        write_grid_controls(out / "controls_mcam.csv", r.coarse, r.coarse_steps, r.mcam_controls);

    {
        auto f = open_out(out / "measures.csv");
        f << "t,atom";
        for (std::size_t j = 0; j < r.problem.state_dim; ++j) f << ",x" << j + 1;
        f << ",weight\n";
        for (std::size_t n = 0; n < r.m_bar.size(); ++n)
            for (std::size_t a = 0; a < r.m_bar[n].size(); ++a) {
                f << format_value(r.coarse_steps.time(n)) << ',' << a;
                for (std::size_t j = 0; j < r.m_bar[n].dim(); ++j)
                    f << ',' << format_value(r.m_bar[n].particles()[a][j]);
                f << ',' << format_value(r.m_bar[n].weights()[a]) << '\n';
            }
        auto g = open_out(out / "mean_path.csv");
        g << "t";
        for (std::size_t j = 0; j < r.problem.state_dim; ++j) g << ",m" << j + 1;
        g << '\n';
        const auto means = path_means(r.m_bar);
        for (std::size_t n = 0; n < means.size(); ++n) {
            g << format_value(r.coarse_steps.time(n));
            for (std::size_t j = 0; j < means[n].size(); ++j) g << ',' << format_value(means[n][j]);
            g << '\n';
        }
    }

    write_checkpoint((out / "theta_final.csv").string(), r.arch, r.theta);

    // Sample paths of the learned policy, with the population law taken from
    // the simulated particles themselves.
    const StepSizes path_steps = StepSizes::make(r.problem.horizon, r.coarse_steps.h1, c.h2);
    const PathBundle paths = simulate_sde(r.problem, policy, {}, path_steps,
                                          SdeOptions{c.n_particles, stream_seed(c.seed, kPathStream), true, true});
    {
        auto f = open_out(out / "paths.csv");
        f << "path,t";
        for (std::size_t j = 0; j < r.problem.state_dim; ++j) f << ",x" << j + 1;
        for (std::size_t j = 0; j < r.problem.control_dim; ++j) f << ",a" << j + 1;
        const bool w0 = !paths.common_noise.empty();
        if (w0) f << ",w0";
        f << '\n';
        for (std::size_t p = 0; p < std::min(c.report_paths, paths.n_paths); ++p)
            for (std::size_t n = 0; n < paths.n_times(); ++n) {
                f << p << ',' << format_value(paths.times[n]);
                for (std::size_t j = 0; j < r.problem.state_dim; ++j) f << ',' << format_value(paths.state(p, n)[j]);
                for (std::size_t j = 0; j < r.problem.control_dim; ++j)
                    f << ',' << format_value(paths.control(p, n)[j]);
                if (w0) f << ',' << format_value(paths.common_noise[n]);
                f << '\n';
            }
    }

    json report{{"model", c.model},
                {"seed", c.seed},
                {"iterations", r.history.size()},
                {"stop_reason", r.stop_reason},
                {"value_converged", r.value_converged},
                {"w2_converged", r.w2_converged},
                {"first_w2_below", r.first_w2_below},
                {"w2_threshold", fixed_point_threshold(c.q, r.coarse_steps.h1)},
                {"coarse", {{"h1", r.coarse_steps.h1}, {"h2", r.coarse_steps.h2}, {"nodes", r.coarse.size()}}},
                {"fine", {{"h1", r.fine_steps.h1}, {"h2", r.fine_steps.h2}, {"nodes", r.fine.size()}}},
                {"parameters", r.arch.parameter_count()}};
    if (!r.history.empty()) {
        const IterationRecord& last = r.history.back();
        report["final_value_change"] = last.value_change;
        report["final_w2_gap"] = last.gap;
        report["final_best_G"] = last.best_G;
        report["final_fit_mse"] = last.fit_mse;
    }

    if (c.model == "lq") {
        const auto scenarios = compare_lq(c.lq, c.lq_box, r.arch, r.theta, path_steps, c.n_particles, c.scenarios,
                                          c.seed);
        write_lq_trajectories((out / "lq_trajectories.csv").string(), scenarios, c.lq, c.report_paths);
        json js = json::array();
        for (const auto& s : scenarios)
            js.push_back({{"seed", s.seed},
                          {"control_error", s.control_error},
                          {"mean_error", s.mean_error},
                          {"state_error", s.state_error}});
        report["lq_scenarios"] = js;
    }
    open_out(out / "report.json") << report.dump(2) << '\n';

    const json timing{{"total_seconds", r.times.total}, {"dp_seconds", r.times.dp},
                      {"simulate_seconds", r.times.simulate}, {"average_seconds", r.times.average},
                      {"fit_seconds", r.times.fit}, {"sa_seconds", r.times.sa},
                      {"value_seconds", r.times.value}};
    open_out(out / "timing.json") << timing.dump(2) << '\n';
}

}  // namespace hmfg
