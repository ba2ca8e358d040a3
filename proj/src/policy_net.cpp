#include "hmfg/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hmfg/error.hpp"
#include "hmfg/rng.hpp"
#include "parallel.hpp"

namespace hmfg {

std::size_t NetworkArchitecture::parameter_count() const {
    std::size_t count = 0;
    std::size_t in = input_dim();
    for (std::size_t w : hidden) {
        count += w * in + w;
        in = w;
    }
    return count + control_dim * in + control_dim;
}

void NetworkArchitecture::validate() const {
    if (state_dim == 0 || state_dim > kMaxDim || control_dim == 0 || control_dim > kMaxDim)
        throw Error(ErrorCode::DimensionMismatch, "network dimensions must lie in 1..3");
    for (std::size_t w : hidden)
        if (w == 0) throw Error(ErrorCode::InvalidParams, "hidden layer widths must be at least 1");
    if (input_box.dim() != state_dim || control_box.dim() != control_dim)
        throw Error(ErrorCode::DimensionMismatch, "network boxes do not match its dimensions");
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidParams, "network horizon must be positive");
    for (std::size_t i = 0; i < state_dim; ++i)
        if (!(input_box.upper[i] > input_box.lower[i]))
            throw Error(ErrorCode::InvalidParams, "degenerate network input box");
}

NetworkArchitecture architecture_for(const MfgProblem& problem, std::vector<std::size_t> hidden) {
    NetworkArchitecture arch;
    arch.state_dim = problem.state_dim;
    arch.control_dim = problem.control_dim;
    arch.hidden = std::move(hidden);
    arch.horizon = problem.horizon;
    arch.input_box = problem.policy_box.dim() == problem.state_dim ? problem.policy_box : problem.domain;
    arch.control_box = problem.controls;
    arch.validate();
    return arch;
}

ParameterVector initial_parameters(const NetworkArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(seed);
    ParameterVector theta;
    theta.reserve(arch.parameter_count());
    std::size_t in = arch.input_dim();
    auto layer = [&](std::size_t out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (std::size_t k = 0; k < out * in; ++k) theta.push_back(rng.uniform(-limit, limit));
        for (std::size_t k = 0; k < out; ++k) theta.push_back(0.0);
        in = out;
    };
    for (std::size_t w : arch.hidden) layer(w);
    layer(arch.control_dim);
    return theta;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_length(const NetworkArchitecture& arch, const ParameterVector& theta) {
    if (theta.size() != arch.parameter_count())
        throw Error(ErrorCode::LengthMismatch, "parameter vector has length " + std::to_string(theta.size()) +
                                                   ", architecture needs " +
                                                   std::to_string(arch.parameter_count()));
}

// Activations of every layer for one input; acts[0] is the normalized input,
// the last entry holds the output pre-activations.
struct Pass {
    std::vector<std::vector<double>> acts;
};

void run_forward(const NetworkArchitecture& arch, const ParameterVector& theta, double t, const Point& y,
                 Pass& pass) {
    const std::size_t n_layers = arch.hidden.size() + 1;
    pass.acts.resize(n_layers + 1);
    auto& input = pass.acts[0];
    input.resize(arch.input_dim());
    input[0] = 2.0 * t / arch.horizon - 1.0;
    for (std::size_t i = 0; i < arch.state_dim; ++i)
        input[i + 1] = 2.0 * (y[i] - arch.input_box.lower[i]) / (arch.input_box.upper[i] - arch.input_box.lower[i]) - 1.0;

    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& in = pass.acts[l];
        const std::size_t out_dim = l < arch.hidden.size() ? arch.hidden[l] : arch.control_dim;
        auto& out = pass.acts[l + 1];
        out.resize(out_dim);
        const double* w = theta.data() + offset;
        const double* b = w + out_dim * in.size();
        for (std::size_t o = 0; o < out_dim; ++o) {
            double z = b[o];
            const double* row = w + o * in.size();
            for (std::size_t i = 0; i < in.size(); ++i) z += row[i] * in[i];
            out[o] = l < arch.hidden.size() ? std::tanh(z) : z;
        }
        offset += out_dim * in.size() + out_dim;
    }
}

Point squash(const NetworkArchitecture& arch, const std::vector<double>& z) {
    Point a(arch.control_dim);
    for (std::size_t i = 0; i < arch.control_dim; ++i) {
        const double lo = arch.control_box.lower[i], hi = arch.control_box.upper[i];
        a[i] = std::clamp(lo + (hi - lo) * sigmoid(z[i]), lo, hi);
    }
    return a;
}

// Adds d(|target - N|^2)/d theta for one sample into grad; returns the sample loss.
double backprop(const NetworkArchitecture& arch, const ParameterVector& theta, double t, const Point& y,
                const Point& target, Pass& pass, std::vector<double>& delta, std::vector<double>& next_delta,
                double* grad) {
    run_forward(arch, theta, t, y, pass);
    const std::size_t n_layers = arch.hidden.size() + 1;
    const auto& z = pass.acts[n_layers];
    double loss = 0.0;
    delta.assign(arch.control_dim, 0.0);
    for (std::size_t i = 0; i < arch.control_dim; ++i) {
        const double lo = arch.control_box.lower[i], hi = arch.control_box.upper[i];
        const double s = sigmoid(z[i]);
        const double r = lo + (hi - lo) * s - target[i];
        loss += r * r;
        delta[i] = 2.0 * r * (hi - lo) * s * (1.0 - s);
    }

    // layer offsets
    std::vector<std::size_t> offsets(n_layers);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = offset;
        const std::size_t out_dim = l < arch.hidden.size() ? arch.hidden[l] : arch.control_dim;
        offset += out_dim * pass.acts[l].size() + out_dim;
    }
    for (std::size_t l = n_layers; l-- > 0;) {
        const auto& in = pass.acts[l];
        const std::size_t out_dim = delta.size();
        const double* w = theta.data() + offsets[l];
        double* gw = grad + offsets[l];
        double* gb = gw + out_dim * in.size();
        for (std::size_t o = 0; o < out_dim; ++o) {
            gb[o] += delta[o];
            for (std::size_t i = 0; i < in.size(); ++i) gw[o * in.size() + i] += delta[o] * in[i];
        }
        if (l == 0) break;
        next_delta.assign(in.size(), 0.0);
        for (std::size_t o = 0; o < out_dim; ++o)
            for (std::size_t i = 0; i < in.size(); ++i) next_delta[i] += w[o * in.size() + i] * delta[o];
        for (std::size_t i = 0; i < in.size(); ++i) next_delta[i] *= 1.0 - in[i] * in[i];
        std::swap(delta, next_delta);
    }
    return loss;
}

constexpr std::size_t kChunk = 64;

}  // namespace

Point forward(const NetworkArchitecture& arch, const ParameterVector& theta, double t, const Point& y) {
    check_length(arch, theta);
    if (y.size() != arch.state_dim) throw Error(ErrorCode::DimensionMismatch, "network input dimension");
    Pass pass;
    run_forward(arch, theta, t, y, pass);
    return squash(arch, pass.acts.back());
}

ControlPolicy network_policy(const MfgProblem& problem, const NetworkArchitecture& arch, ParameterVector theta) {
    check_length(arch, theta);
    return [coords = problem.policy_state, arch, theta = std::move(theta)](double t, const Point& x,
                                                                           const EmpiricalMeasure& m) {
        thread_local Pass pass;
        run_forward(arch, theta, t, coords ? coords(x, m) : x, pass);
        return squash(arch, pass.acts.back());
    };
}

void FitData::canonicalize() {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (t[a] != t[b]) return t[a] < t[b];
        if (y[a] < y[b] || y[b] < y[a]) return y[a] < y[b];
        return target[a] < target[b];
    });
    FitData out;
    for (std::size_t i : order) {
        out.t.push_back(t[i]);
        out.y.push_back(y[i]);
        out.target.push_back(target[i]);
    }
    *this = std::move(out);
}

FitData make_fit_data(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                      const MeasurePath& m_path, const GridControlField& field) {
    if (field.layers() != steps.n_time || field.nodes() != lattice.size())
        throw Error(ErrorCode::LengthMismatch, "control field shape does not match lattice and time grid");
    FitData data;
    for (std::size_t n = 0; n < steps.n_time; ++n) {
        const EmpiricalMeasure& m = measure_at(m_path, steps, n);
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            data.t.push_back(steps.time(n));
            data.y.push_back(problem.policy_coordinates(lattice.node(i), m));
            data.target.push_back(field.at(n, i));
        }
    }
    data.canonicalize();
    return data;
}

ParameterVector grad_fit_loss(const NetworkArchitecture& arch, const ParameterVector& theta, const FitData& data,
                              double* loss) {
    check_length(arch, theta);
    const std::size_t r = theta.size();
    const std::size_t n_chunks = (data.size() + kChunk - 1) / kChunk;
    std::vector<double> partial(n_chunks * r, 0.0);
    std::vector<double> partial_loss(n_chunks, 0.0);
    detail::parallel_for(n_chunks, [&](std::size_t c) {
        Pass pass;
        std::vector<double> delta, next;
        const std::size_t end = std::min(data.size(), (c + 1) * kChunk);
        double s = 0.0;
        for (std::size_t k = c * kChunk; k < end; ++k)
            s += backprop(arch, theta, data.t[k], data.y[k], data.target[k], pass, delta, next, partial.data() + c * r);
        partial_loss[c] = s;
    });
    ParameterVector grad(r, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t j = 0; j < r; ++j) grad[j] += partial[c * r + j];
        total += partial_loss[c];
    }
    if (loss) *loss = total;
    return grad;
}

double fit_loss(const NetworkArchitecture& arch, const ParameterVector& theta, const FitData& data) {
    check_length(arch, theta);
    const std::size_t n_chunks = (data.size() + kChunk - 1) / kChunk;
    std::vector<double> partial(n_chunks, 0.0);
    detail::parallel_for(n_chunks, [&](std::size_t c) {
        Pass pass;
        const std::size_t end = std::min(data.size(), (c + 1) * kChunk);
        double s = 0.0;
        for (std::size_t k = c * kChunk; k < end; ++k) {
            run_forward(arch, theta, data.t[k], data.y[k], pass);
            s += squared_distance(squash(arch, pass.acts.back()), data.target[k]);
        }
        partial[c] = s;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

FitResult fit_to_grid(const NetworkArchitecture& arch, const ParameterVector& theta0, const FitData& data,
                      const FitOptions& options) {
    check_length(arch, theta0);
    if (data.size() == 0) throw Error(ErrorCode::InvalidParams, "fit needs at least one sample");
    const double n = static_cast<double>(data.size());
    FitResult res;
    ParameterVector theta = theta0;
    double loss = 0.0;
    ParameterVector grad = grad_fit_loss(arch, theta, data, &loss);
    res.history.push_back(loss);

    auto dot = [](const ParameterVector& a, const ParameterVector& b) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
        return s;
    };
    double step = 0.0;
    ParameterVector prev_theta, prev_grad;
    while (loss / n > options.trigger && res.steps < options.max_steps) {
        const double g2 = dot(grad, grad);
        if (!(g2 > 0.0)) break;
        if (!prev_theta.empty()) {
            ParameterVector s(theta.size()), y(theta.size());
            for (std::size_t j = 0; j < theta.size(); ++j) {
                s[j] = theta[j] - prev_theta[j];
                y[j] = grad[j] - prev_grad[j];
            }
            const double sy = dot(s, y);
            if (sy > 0.0) step = dot(s, s) / sy;
            else step *= 2.0;
        } else {
            step = 1e-2 / std::sqrt(g2);
        }

        ParameterVector trial(theta.size());
        double trial_loss = loss;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            for (std::size_t j = 0; j < theta.size(); ++j) trial[j] = theta[j] - step * grad[j];
            trial_loss = fit_loss(arch, trial, data);
            if (std::isfinite(trial_loss) && trial_loss <= loss - 1e-4 * step * g2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        prev_theta = std::move(theta);
        prev_grad = std::move(grad);
        theta = std::move(trial);
        grad = grad_fit_loss(arch, theta, data, &loss);
        res.history.push_back(loss);
        ++res.steps;
    }
    for (double& v : theta) v = std::clamp(v, -options.bound, options.bound);
    res.mse = fit_loss(arch, theta, data) / n;
    res.theta = std::move(theta);
    return res;
}

namespace {

std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_checkpoint(const std::string& path, const NetworkArchitecture& arch, const ParameterVector& theta) {
    check_length(arch, theta);
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "index,value\n";
    for (std::size_t j = 0; j < theta.size(); ++j) out << j << ',' << format17(theta[j]) << '\n';

    std::ofstream side(path + ".arch");
    if (!side) throw Error(ErrorCode::IoError, "cannot write " + path + ".arch");
    side << "state_dim " << arch.state_dim << '\n' << "control_dim " << arch.control_dim << '\n' << "hidden";
    for (std::size_t w : arch.hidden) side << ' ' << w;
    side << '\n' << "horizon " << format17(arch.horizon) << '\n';
    auto box_line = [&](const char* name, const Point& p) {
        side << name;
        for (double v : p) side << ' ' << format17(v);
        side << '\n';
    };
    box_line("input_lower", arch.input_box.lower);
    box_line("input_upper", arch.input_box.upper);
    box_line("control_lower", arch.control_box.lower);
    box_line("control_upper", arch.control_box.upper);
}

ParameterVector read_parameters(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::string line;
    std::getline(in, line);
    if (line != "index,value") throw Error(ErrorCode::IoError, path + ": missing 'index,value' header");
    ParameterVector theta;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::IoError, path + ": malformed line '" + line + "'");
        if (std::stoul(line.substr(0, comma)) != theta.size())
            throw Error(ErrorCode::IoError, path + ": indices out of order");
        theta.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
    }
    return theta;
}

NetworkArchitecture read_architecture(const std::string& path) {
    const std::string file = path + ".arch";
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + file);
    NetworkArchitecture arch;
    arch.hidden.clear();
    std::string line;
    auto read_point = [](std::istringstream& ss) {
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        return Point(std::span<const double>(v));
    };
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "state_dim") ss >> arch.state_dim;
        else if (key == "control_dim") ss >> arch.control_dim;
        else if (key == "hidden") {
            std::size_t w;
            while (ss >> w) arch.hidden.push_back(w);
        } else if (key == "horizon") ss >> arch.horizon;
        else if (key == "input_lower") arch.input_box.lower = read_point(ss);
        else if (key == "input_upper") arch.input_box.upper = read_point(ss);
        else if (key == "control_lower") arch.control_box.lower = read_point(ss);
        else if (key == "control_upper") arch.control_box.upper = read_point(ss);
    }
    arch.validate();
    return arch;
}

}  // namespace hmfg
