#include "hmfg/sa.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "hmfg/error.hpp"
#include "hmfg/rng.hpp"
#include "parallel.hpp"

namespace hmfg {

double SaSchedule::eps(std::size_t l) const { return eps0 / std::pow(static_cast<double>(l + 1), p_eps); }

double SaSchedule::delta(std::size_t l) const { return delta0 / std::pow(static_cast<double>(l + 1), p_delta); }

void SaSchedule::validate() const {
    if (!(eps0 > 0.0) || !(delta0 > 0.0)) throw Error(ErrorCode::InvalidParams, "eps0 and delta0 must be positive");
    if (!(p_eps > 0.0)) throw Error(ErrorCode::InvalidParams, "p_eps must be positive so that eps_l -> 0");
    if (!(p_eps <= 1.0)) throw Error(ErrorCode::InvalidParams, "p_eps must be at most 1 so that sum eps_l diverges");
    if (!(p_delta < p_eps)) throw Error(ErrorCode::InvalidParams, "p_delta must be below p_eps so that eps_l/delta_l -> 0");
    if (!(2.0 * (p_eps - p_delta) > 1.0))
        throw Error(ErrorCode::InvalidParams, "2 (p_eps - p_delta) must exceed 1 so that sum eps_l^2/delta_l^2 converges");
    if (max_steps == 0 || window == 0) throw Error(ErrorCode::InvalidParams, "SA budgets must be at least 1");
    if (!(trigger > 0.0)) throw Error(ErrorCode::InvalidParams, "SA trigger must be positive");
}

ProjectionRegion::ProjectionRegion(double bound) : bound_(bound) {
    if (!(bound > 0.0)) throw Error(ErrorCode::InvalidParams, "projection bound must be positive");
}

ProjectionRegion::ProjectionRegion(double bound, double band, const NetworkArchitecture& arch,
                                   const ParameterVector& theta0, const FitData& anchors)
    : bound_(bound), band_(band), arch_(arch) {
    if (!(bound > 0.0) || !(band >= 0.0)) throw Error(ErrorCode::InvalidParams, "invalid projection region");
    anchors_ = anchors;
    for (std::size_t k = 0; k < anchors_.size(); ++k)
        anchors_.target[k] = forward(arch_, theta0, anchors_.t[k], anchors_.y[k]);
}

ParameterVector ProjectionRegion::clamp(ParameterVector theta) const {
    for (double& v : theta) v = std::clamp(v, -bound_, bound_);
    return theta;
}

bool ProjectionRegion::in_band(const ParameterVector& theta) const {
    if (band_ <= 0.0 || anchors_.size() == 0) return true;
    std::vector<char> ok(anchors_.size(), 1);
    detail::parallel_for(anchors_.size(), [&](std::size_t k) {
        const Point a = forward(arch_, theta, anchors_.t[k], anchors_.y[k]);
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - anchors_.target[k][i]) > band_ + 1e-12) ok[k] = 0;
    });
    return std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
}

bool ProjectionRegion::contains(const ParameterVector& theta) const {
    for (double v : theta)
        if (!(std::abs(v) <= bound_)) return false;
    return in_band(theta);
}

KwResult kw_step(const ParameterVector& theta, const SaSchedule& schedule, const ProjectionRegion& region,
                 const ImprovementFn& improvement, std::size_t l, std::uint64_t seed) {
    const std::size_t r = theta.size();
    KwResult out;
    out.eps = schedule.eps(l);
    out.delta = schedule.delta(l);

    std::vector<double> values(2 * r);
    const std::uint64_t shared = stream_seed(seed, l);
    detail::parallel_for(2 * r, [&](std::size_t k) {
        ParameterVector probe = theta;
        probe[k / 2] += (k % 2 == 0 ? out.delta : -out.delta);
        const std::uint64_t s = schedule.paired_seeds ? shared : stream_seed(seed, l, k + 1);
        values[k] = improvement(probe, s);
    });
    out.gradient.resize(r);
    for (std::size_t j = 0; j < r; ++j) {
        if (!std::isfinite(values[2 * j]) || !std::isfinite(values[2 * j + 1]))
            throw Error(ErrorCode::NonFiniteEvaluation,
                        "improvement returned a non-finite value at SA step " + std::to_string(l));
        out.gradient[j] = (values[2 * j] - values[2 * j + 1]) / (2.0 * out.delta);
    }

    ParameterVector next = theta;
    double scale = out.eps;
    bool found = false;
    for (int halving = 0; halving <= 20; ++halving) {
        ParameterVector trial(r);
        for (std::size_t j = 0; j < r; ++j) trial[j] = theta[j] + scale * out.gradient[j];
        trial = region.clamp(std::move(trial));
        if (region.in_band(trial)) {
            next = std::move(trial);
            found = true;
            break;
        }
        scale *= 0.5;
    }
    if (!found) next = theta;

    out.projection.resize(r);
    for (std::size_t j = 0; j < r; ++j) {
        out.projection[j] = (next[j] - theta[j] - out.eps * out.gradient[j]) / out.eps;
        if (out.projection[j] != 0.0) out.projected = true;
    }
    out.theta = std::move(next);
    return out;
}

TrainResult train(const ParameterVector& theta_init, const SaSchedule& schedule, const ProjectionRegion& region,
                  const ImprovementFn& improvement, std::uint64_t seed) {
    schedule.validate();
    if (!region.contains(theta_init)) throw Error(ErrorCode::InvalidParams, "initial parameters lie outside H");

    TrainResult res;
    ParameterVector theta = theta_init;
    res.theta = theta;
    res.best_G = improvement(theta, stream_seed(seed, 0));
    if (!std::isfinite(res.best_G)) throw Error(ErrorCode::NonFiniteEvaluation, "improvement at the initial parameters");

    std::deque<double> window{res.best_G};
    double window_sum = res.best_G;
    double previous_average = res.best_G;
    for (std::size_t l = 0; l < schedule.max_steps; ++l) {
        KwResult step = kw_step(theta, schedule, region, improvement, l, seed);
        theta = std::move(step.theta);
        const double G = improvement(theta, stream_seed(seed, l + 1));
        if (!std::isfinite(G)) throw Error(ErrorCode::NonFiniteEvaluation, "improvement at SA step " + std::to_string(l));
        double norm = 0.0;
        for (double g : step.gradient) norm += g * g;
        res.trace.push_back({l, G, step.eps, step.delta, std::sqrt(norm), step.projected});
        res.steps = l + 1;
        if (G > res.best_G) {
            res.best_G = G;
            res.theta = theta;
        }

        window.push_back(G);
        window_sum += G;
        if (window.size() > schedule.window) {
            window_sum -= window.front();
            window.pop_front();
        }
        const double average = window_sum / static_cast<double>(window.size());
        if (std::abs(average - previous_average) < schedule.trigger) break;
        previous_average = average;
    }
    return res;
}

double improvement(const ImprovementContext& ctx, const ParameterVector& theta, std::size_t n_mc,
                   std::uint64_t seed) {
    if (n_mc == 0) throw Error(ErrorCode::InvalidParams, "n_mc must be at least 1");
    const MfgProblem& pr = *ctx.problem;
    const ControlPolicy policy = network_policy(pr, ctx.arch, theta);
    const std::size_t n_time = ctx.steps.n_time;
    std::vector<double> cost(n_mc, 0.0);
    detail::parallel_for(n_mc, [&](std::size_t k) {
        Rng rng(stream_seed(seed, k));
        const std::size_t start = static_cast<std::size_t>(rng.next_u64() % n_time);
        std::size_t node = static_cast<std::size_t>(rng.next_u64() % ctx.lattice.size());
        double s = 0.0;
        for (std::size_t n = start; n < n_time; ++n) {
            const double t = ctx.steps.time(n);
            const EmpiricalMeasure& m = measure_at(ctx.m_path, ctx.steps, n);
            const Point x = ctx.lattice.node(node);
            const Point alpha = policy(t, x, m);
            s += pr.running_cost(t, x, m, alpha) * ctx.steps.h2;
            const TransitionRow row = transition_row(pr, ctx.lattice, ctx.steps, t, node, m, alpha);
            const double u = rng.uniform();
            double cumulative = 0.0;
            std::size_t next = row.entries[row.count - 1].target;
            for (const auto& e : row.targets()) {
                cumulative += e.probability;
                if (u < cumulative) {
                    next = e.target;
                    break;
                }
            }
            node = next;
        }
        cost[k] = s + pr.terminal_cost(ctx.lattice.node(node), measure_at(ctx.m_path, ctx.steps, n_time));
    });
    double total = 0.0;
    for (double c : cost) total += c;
    return -total / static_cast<double>(n_mc);
}

double exact_improvement(const ImprovementContext& ctx, const ParameterVector& theta) {
    const MfgProblem& pr = *ctx.problem;
    const GridControlField field =
        tabulate_policy(pr, ctx.lattice, ctx.steps, ctx.m_path, network_policy(pr, ctx.arch, theta));
    const ValueTable v = evaluate_controls(pr, ctx.lattice, ctx.steps, ctx.m_path, field);
    double total = 0.0;
    for (std::size_t n = 0; n < ctx.steps.n_time; ++n)
        for (double value : v.layer(n)) total += value;
    return -total / static_cast<double>(ctx.steps.n_time * ctx.lattice.size());
}

}  // namespace hmfg
