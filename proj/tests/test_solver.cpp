#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hmfg/config.hpp"
#include "hmfg/error.hpp"
#include "hmfg/solver.hpp"

using namespace hmfg;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_lq(const fs::path& out) {
    RunConfig c;
    c.model = "lq";
    c.coarse_nodes = 6;
    c.fine_nodes = 11;
    c.control_points = 7;
    c.hidden = {3};
    c.fit.max_steps = 50;
    c.sa.max_steps = 3;
    c.sa.window = 2;
    c.evaluator = "mc";
    c.n_mc = 20;
    c.n_particles = 200;
    c.scenarios = 1;
    c.report_paths = 2;
    c.max_iterations = 3;
    c.output = out.string();
    return c;
}

std::string bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hmfg_test_" + name);
    fs::remove_all(p);
    return p;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("config: required key, unknown keys and bad values") {
    try {
        parse_config_text("[model]\nrho = 0.2\n");
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        CHECK(std::string(e.what()).find("model.name") != std::string::npos);
    }
    CHECK(code_of([] { parse_config_text("[model]\nname = lq\nrhoo = 0.1\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config_text("[model]\nname = lq\n[lattice]\nh2 = fast\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config_text("[model]\nname = lq\nepsilon = 0.001\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config_text("[model]\nname = heat\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config_file("/nonexistent/run.ini"); }) == ErrorCode::ConfigError);

    const RunConfig c = parse_config_text("[model]\nname = mfg2d\n[network]\nhidden = 4, 5\n[simulation]\nseed = 9\n");
    CHECK(c.hidden == std::vector<std::size_t>{4, 5});
    CHECK(c.seed == 9);
}

TEST_CASE("config: serialization round trip is lossless") {
    RunConfig c = tiny_lq("somewhere");
    c.lq.rho = std::nextafter(0.2, 1.0);
    c.fit.trigger = 1.0 / 3.0;
    c.sa.paired_seeds = false;
    c.stop_rule = "both";
    CHECK(parse_config_text(serialize_config(c)) == c);
}

TEST_CASE("spacing_for needs equal axes") {
    CHECK(spacing_for(Box{Point{0.0}, Point{1.0}}, 6) == doctest::Approx(0.2));
    CHECK(code_of([] { spacing_for(Box{Point{0.0, 0.0}, Point{1.0, 2.0}}, 6); }) == ErrorCode::ConfigError);
}

TEST_CASE("degenerate objective converges at the first iteration with zero values") {
    RunConfig c;
    c.model = "null";
    c.coarse_nodes = 6;
    c.fine_nodes = 11;
    c.control_points = 3;
    c.hidden = {2};
    c.fit.max_steps = 20;
    c.sa.max_steps = 3;
    c.n_particles = 100;
    SolveOptions o;
    o.write_files = false;
    const SolveResult r = run_algorithm1(c, o);
    REQUIRE(r.history.size() == 1);
    CHECK(r.history[0].value_change == 0.0);
    CHECK(r.value_converged);
    for (double v : r.value_fine.values()) CHECK(v == 0.0);
}

TEST_CASE("solve is deterministic and resumable") {
    const fs::path a = scratch("a"), b = scratch("b"), c = scratch("c");
    const RunConfig full_a = tiny_lq(a);
    const SolveResult ra = run_algorithm1(full_a);
    write_outputs(ra);
    const SolveResult rb = run_algorithm1(tiny_lq(b));
    write_outputs(rb);
    for (const char* name : {"report.json", "value_fine.csv", "value_coarse.csv", "controls.csv", "measures.csv",
                             "paths.csv", "lq_trajectories.csv", "theta_checkpoint_k3.csv", "trace_sa.jsonl"})
        CHECK_MESSAGE(bytes(a / name) == bytes(b / name), name);

    RunConfig first = tiny_lq(c);
    first.max_iterations = 2;
    run_algorithm1(first);
    SolveOptions resume;
    resume.resume = true;
    const SolveResult rc = run_algorithm1(tiny_lq(c), resume);
    CHECK(rc.theta == ra.theta);
    CHECK(rc.value_fine.values() == ra.value_fine.values());
    CHECK(rc.history.size() == 3);
    CHECK(bytes(c / "trace_fixedpoint.jsonl") == bytes(a / "trace_fixedpoint.jsonl"));
    CHECK(bytes(c / "trace_sa.jsonl") == bytes(a / "trace_sa.jsonl"));

    RunConfig other = tiny_lq(c);
    other.seed = 2;
    CHECK(code_of([&] { run_algorithm1(other, resume); }) == ErrorCode::ConfigError);
    for (const auto& p : {a, b, c}) fs::remove_all(p);
}
