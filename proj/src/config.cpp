#include "hmfg/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hmfg/error.hpp"

namespace hmfg {

namespace {

namespace pt = boost::property_tree;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Reader {
public:
    explicit Reader(const pt::ptree& tree) : tree_(tree) {}

    std::string text(const std::string& key) {
        used_.insert(key);
        return tree_.get<std::string>(pt::ptree::path_type(key, '.'));
    }

    bool has(const std::string& key) const {
        return tree_.get_optional<std::string>(pt::ptree::path_type(key, '.')).has_value();
    }

    void read(const std::string& key, std::string& out) {
        if (has(key)) out = text(key);
    }

    void read(const std::string& key, double& out) {
        if (!has(key)) return;
        const std::string s = text(key);
        try {
            std::size_t used = 0;
            out = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigError, "key '" + key + "' is not a number: '" + s + "'");
        }
    }

    void read(const std::string& key, std::size_t& out) {
        if (!has(key)) return;
        const std::string s = text(key);
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(s, &used);
            if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
            out = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigError, "key '" + key + "' is not a non-negative integer: '" + s + "'");
        }
    }

    void read(const std::string& key, bool& out) {
        if (!has(key)) return;
        const std::string s = text(key);
        if (s == "true" || s == "1") out = true;
        else if (s == "false" || s == "0") out = false;
        else throw Error(ErrorCode::ConfigError, "key '" + key + "' is not a boolean: '" + s + "'");
    }

    void read(const std::string& key, std::vector<std::size_t>& out) {
        if (!has(key)) return;
        const std::string s = text(key);
        std::vector<std::size_t> v;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                const auto n = std::stoull(item, &used);
                while (used < item.size() && item[used] == ' ') ++used;
                if (used != item.size() || n == 0) throw std::invalid_argument(item);
                v.push_back(static_cast<std::size_t>(n));
            } catch (const std::exception&) {
                throw Error(ErrorCode::ConfigError, "key '" + key + "' must be a comma list of positive integers");
            }
        }
        if (v.empty()) throw Error(ErrorCode::ConfigError, "key '" + key + "' is empty");
        out = std::move(v);
    }

    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty())
                throw Error(ErrorCode::ConfigError, "key '" + section + "' is outside any section");
            for (const auto& [name, value] : body) {
                const std::string key = section + "." + name;
                if (!used_.count(key)) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
            }
        }
    }

private:
    const pt::ptree& tree_;
    std::set<std::string> used_;
};

RunConfig from_tree(const pt::ptree& tree) {
    Reader r(tree);
    RunConfig c;
    if (!r.has("model.name")) throw Error(ErrorCode::ConfigError, "missing required key 'model.name'");
    c.model = r.text("model.name");
    r.read("model.a", c.lq.a);
    r.read("model.q", c.lq.q);
    r.read("model.c", c.lq.c);
    r.read("model.epsilon", c.lq.epsilon);
    r.read("model.rho", c.lq.rho);
    r.read("model.sigma", c.lq.sigma);
    r.read("model.T", c.lq.T);
    r.read("model.lower", c.lq_box.lower);
    r.read("model.upper", c.lq_box.upper);
    r.read("model.control_bound", c.lq_box.control_bound);

    r.read("lattice.h2", c.h2);
    r.read("lattice.coarse_nodes", c.coarse_nodes);
    r.read("lattice.fine_nodes", c.fine_nodes);
    r.read("lattice.control_points", c.control_points);

    r.read("network.hidden", c.hidden);

    r.read("fit.trigger", c.fit.trigger);
    r.read("fit.max_steps", c.fit.max_steps);
    r.read("fit.bound", c.fit.bound);

    r.read("sa.eps0", c.sa.eps0);
    r.read("sa.delta0", c.sa.delta0);
    r.read("sa.p_eps", c.sa.p_eps);
    r.read("sa.p_delta", c.sa.p_delta);
    r.read("sa.max_steps", c.sa.max_steps);
    r.read("sa.trigger", c.sa.trigger);
    r.read("sa.window", c.sa.window);
    r.read("sa.paired_seeds", c.sa.paired_seeds);
    r.read("sa.band", c.band);
    r.read("sa.evaluator", c.evaluator);
    r.read("sa.n_mc", c.n_mc);

    r.read("iteration.trigger", c.value_trigger);
    r.read("iteration.max_iterations", c.max_iterations);
    r.read("iteration.q", c.q);
    r.read("iteration.stop_rule", c.stop_rule);
    r.read("iteration.w2_atoms", c.w2_atoms);
    r.read("iteration.initial_measure", c.initial_measure);

    r.read("simulation.n_particles", c.n_particles);
    r.read("simulation.max_atoms", c.max_atoms);
    r.read("simulation.report_paths", c.report_paths);
    r.read("simulation.scenarios", c.scenarios);
    {
        std::size_t seed = c.seed;
        r.read("simulation.seed", seed);
        c.seed = seed;
    }
    r.read("simulation.output", c.output);
    r.reject_unknown();
    c.validate();
    return c;
}

}  // namespace

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
    if (model != "lq" && model != "mfg2d" && model != "null")
        fail("model.name must be 'lq', 'mfg2d' or 'null', got '" + model + "'");
    if (model == "lq") {
        try {
            lq.validate();
        } catch (const Error& e) {
            fail(std::string("model parameters: ") + e.what());
        }
        if (!(lq_box.lower <= 0.0 && lq_box.upper >= 1.0))
            fail("model.lower/model.upper must contain the initial support [0, 1]");
        if (!(lq_box.control_bound > 0.0)) fail("model.control_bound must be positive");
    }
    if (!(h2 > 0.0)) fail("lattice.h2 must be positive");
    if (coarse_nodes < 2) fail("lattice.coarse_nodes must be at least 2");
    if (fine_nodes < 2) fail("lattice.fine_nodes must be at least 2");
    if (control_points < 1) fail("lattice.control_points must be at least 1");
    if (!(fit.trigger >= 0.0)) fail("fit.trigger must be non-negative");
    if (!(fit.bound > 0.0)) fail("fit.bound must be positive");
    try {
        sa.validate();
    } catch (const Error& e) {
        fail(std::string("sa schedule: ") + e.what());
    }
    if (!(band > 0.0)) fail("sa.band must be positive");
    if (evaluator != "mc" && evaluator != "exact") fail("sa.evaluator must be 'mc' or 'exact'");
    if (evaluator == "mc" && n_mc == 0) fail("sa.n_mc must be positive");
    if (!(value_trigger >= 0.0)) fail("iteration.trigger must be non-negative");
    if (max_iterations == 0) fail("iteration.max_iterations must be positive");
    if (!(q > 0.0 && q < 1.0)) fail("iteration.q must lie in (0, 1)");
    if (stop_rule != "value" && stop_rule != "w2" && stop_rule != "either" && stop_rule != "both")
        fail("iteration.stop_rule must be value, w2, either or both");
    if (w2_atoms == 0) fail("iteration.w2_atoms must be positive");
    if (initial_measure != "uncontrolled" && initial_measure != "initial")
        fail("iteration.initial_measure must be 'uncontrolled' or 'initial'");
    if (n_particles == 0) fail("simulation.n_particles must be positive");
    if (output.empty()) fail("simulation.output must not be empty");
}

RunConfig parse_config_text(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed config: ") + e.message() + " (line " +
                                                std::to_string(e.line()) + ")");
    }
    return from_tree(tree);
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream o;
    auto hidden = [&] {
        std::string s;
        for (std::size_t i = 0; i < c.hidden.size(); ++i) s += (i ? "," : "") + std::to_string(c.hidden[i]);
        return s;
    };
    auto b = [](bool v) { return v ? "true" : "false"; };
    o << "[model]\nname = " << c.model << "\na = " << fmt(c.lq.a) << "\nq = " << fmt(c.lq.q)
      << "\nc = " << fmt(c.lq.c) << "\nepsilon = " << fmt(c.lq.epsilon) << "\nrho = " << fmt(c.lq.rho)
      << "\nsigma = " << fmt(c.lq.sigma) << "\nT = " << fmt(c.lq.T) << "\nlower = " << fmt(c.lq_box.lower)
      << "\nupper = " << fmt(c.lq_box.upper) << "\ncontrol_bound = " << fmt(c.lq_box.control_bound) << "\n\n";
    o << "[lattice]\nh2 = " << fmt(c.h2) << "\ncoarse_nodes = " << c.coarse_nodes
      << "\nfine_nodes = " << c.fine_nodes << "\ncontrol_points = " << c.control_points << "\n\n";
    o << "[network]\nhidden = " << hidden() << "\n\n";
    o << "[fit]\ntrigger = " << fmt(c.fit.trigger) << "\nmax_steps = " << c.fit.max_steps
      << "\nbound = " << fmt(c.fit.bound) << "\n\n";
    o << "[sa]\neps0 = " << fmt(c.sa.eps0) << "\ndelta0 = " << fmt(c.sa.delta0) << "\np_eps = " << fmt(c.sa.p_eps)
      << "\np_delta = " << fmt(c.sa.p_delta) << "\nmax_steps = " << c.sa.max_steps
      << "\ntrigger = " << fmt(c.sa.trigger) << "\nwindow = " << c.sa.window
      << "\npaired_seeds = " << b(c.sa.paired_seeds) << "\nband = " << fmt(c.band)
      << "\nevaluator = " << c.evaluator << "\nn_mc = " << c.n_mc << "\n\n";
    o << "[iteration]\ntrigger = " << fmt(c.value_trigger) << "\nmax_iterations = " << c.max_iterations
      << "\nq = " << fmt(c.q) << "\nstop_rule = " << c.stop_rule << "\nw2_atoms = " << c.w2_atoms
      << "\ninitial_measure = " << c.initial_measure << "\n\n";
    o << "[simulation]\nn_particles = " << c.n_particles << "\nmax_atoms = " << c.max_atoms
      << "\nreport_paths = " << c.report_paths << "\nscenarios = " << c.scenarios << "\nseed = " << c.seed
      << "\noutput = " << c.output << "\n";
    return o.str();
}

LqParams parse_lq_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open parameter file '" + path + "'");
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed parameter file: ") + e.message());
    }
    Reader r(tree);
    LqParams p;
    r.read("model.a", p.a);
    r.read("model.q", p.q);
    r.read("model.c", p.c);
    r.read("model.epsilon", p.epsilon);
    r.read("model.rho", p.rho);
    r.read("model.sigma", p.sigma);
    r.read("model.T", p.T);
    try {
        p.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, std::string("model parameters: ") + e.what());
    }
    return p;
}

MfgProblem make_problem(const RunConfig& config) {
    if (config.model == "lq") return lq_problem(config.lq, config.lq_box);
    if (config.model == "mfg2d") return mfg2d_problem();
    if (config.model == "null") return null_problem(config.lq.sigma);
    throw Error(ErrorCode::ConfigError, "unknown model '" + config.model + "'");
}

}  // namespace hmfg
