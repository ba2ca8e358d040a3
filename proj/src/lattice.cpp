#include "hmfg/lattice.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hmfg/error.hpp"
#include "parallel.hpp"

namespace hmfg {

StepSizes StepSizes::make(double horizon, double h1, double h2) {
    if (!(h1 > 0.0) || !(h2 > 0.0) || !(horizon > 0.0))
        throw Error(ErrorCode::InvalidParams, "step sizes and horizon must be positive");
    const double ratio = horizon / h2;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(rounded * h2 - horizon) > 1e-12)
        throw Error(ErrorCode::InvalidParams, "time step does not tile the horizon");
    return StepSizes{h1, h2, static_cast<std::size_t>(rounded)};
}

std::size_t StepSizes::index_of(double t) const {
    const double idx = std::round(t / h2);
    if (idx <= 0.0) return 0;
    return std::min(n_time, static_cast<std::size_t>(idx));
}

Lattice Lattice::over(const Box& box, double h1) {
    if (!(h1 > 0.0)) throw Error(ErrorCode::InvalidParams, "lattice spacing must be positive");
    if (box.dim() == 0 || box.dim() > kMaxDim || box.upper.size() != box.dim())
        throw Error(ErrorCode::DimensionMismatch, "lattice box has unsupported dimension");
    Lattice lat;
    lat.box_ = box;
    lat.h1_ = h1;
    lat.size_ = 1;
    for (std::size_t i = 0; i < box.dim(); ++i) {
        const double length = box.upper[i] - box.lower[i];
        if (!(length >= 0.0)) throw Error(ErrorCode::InvalidParams, "empty lattice box");
        const double cells = std::round(length / h1);
        if (std::abs(cells * h1 - length) > 1e-9)
            throw Error(ErrorCode::NonDivisibleDomain,
                        "spacing " + std::to_string(h1) + " does not tile axis " + std::to_string(i));
        lat.counts_[i] = static_cast<std::size_t>(cells) + 1;
        lat.size_ *= lat.counts_[i];
    }
    std::size_t stride = 1;
    for (std::size_t i = box.dim(); i-- > 0;) {
        lat.strides_[i] = stride;
        stride *= lat.counts_[i];
    }
    return lat;
}

Point Lattice::node(std::size_t flat) const {
    Point x(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const std::size_t k = (flat / strides_[i]) % counts_[i];
        x[i] = box_.lower[i] + static_cast<double>(k) * h1_;
    }
    return x;
}

Lattice::MultiIndex Lattice::multi_index(std::size_t flat) const {
    MultiIndex idx{};
    for (std::size_t i = 0; i < dim(); ++i) idx[i] = (flat / strides_[i]) % counts_[i];
    return idx;
}

std::size_t Lattice::flat_index(const MultiIndex& idx) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < dim(); ++i) flat += idx[i] * strides_[i];
    return flat;
}

std::size_t Lattice::nearest(const Point& x) const {
    MultiIndex idx{};
    for (std::size_t i = 0; i < dim(); ++i) {
        const double k = std::round((x[i] - box_.lower[i]) / h1_);
        const double top = static_cast<double>(counts_[i] - 1);
        idx[i] = static_cast<std::size_t>(std::clamp(k, 0.0, top));
    }
    return flat_index(idx);
}

bool Lattice::on_boundary(std::size_t flat) const {
    const MultiIndex idx = multi_index(flat);
    for (std::size_t i = 0; i < dim(); ++i)
        if (idx[i] == 0 || idx[i] + 1 == counts_[i]) return true;
    return false;
}

Lattice build_lattice(const MfgProblem& problem, const StepSizes& steps) {
    if (problem.domain.dim() != problem.state_dim)
        throw Error(ErrorCode::DimensionMismatch, "domain dimension differs from state dimension");
    return Lattice::over(problem.domain, steps.h1);
}

double TransitionRow::total() const {
    double s = 0.0;
    for (const auto& e : targets()) s += e.probability;
    return s;
}

namespace {

struct Move {
    std::array<int, kMaxDim> offset{};
    double rate = 0.0;  // probability per unit h2
};

struct MoveSet {
    std::array<Move, kMaxStencil> moves{};
    std::size_t count = 0;
};

// Off-diagonal jump rates of the chain at (t, x, m, alpha).
MoveSet jump_rates(const MfgProblem& problem, std::size_t d, double h1, double t, const Point& x,
                   const EmpiricalMeasure& m, const Point& alpha) {
    const Point b = problem.drift(t, x, m, alpha);
    const SmallMatrix a = problem.chain_covariance(t, x);
    if (b.size() != d || a.size() != d) throw Error(ErrorCode::DimensionMismatch, "drift/diffusion dimension");
    const double inv_h1sq = 1.0 / (h1 * h1);

    MoveSet set;
    auto push = [&](std::array<int, kMaxDim> off, double rate) {
        if (rate < -1e-12 * inv_h1sq)
            throw Error(ErrorCode::NegativeProbability,
                        "transition rate " + std::to_string(rate) + " is negative (diffusion not diagonally dominant)");
        set.moves[set.count++] = Move{off, std::max(rate, 0.0)};
    };
    for (std::size_t i = 0; i < d; ++i) {
        double off_diag = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            if (j != i) off_diag += std::abs(a(i, j));
        const double base = 0.5 * a(i, i) - 0.5 * off_diag;
        std::array<int, kMaxDim> up{}, down{};
        up[i] = 1;
        down[i] = -1;
        push(up, (base + std::max(b[i], 0.0) * h1) * inv_h1sq);
        push(down, (base + std::max(-b[i], 0.0) * h1) * inv_h1sq);
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double plus = std::max(a(i, j), 0.0) * 0.5 * inv_h1sq;
            const double minus = std::max(-a(i, j), 0.0) * 0.5 * inv_h1sq;
            std::array<int, kMaxDim> pp{}, mm{}, pm{}, mp{};
            pp[i] = 1, pp[j] = 1;
            mm[i] = -1, mm[j] = -1;
            pm[i] = 1, pm[j] = -1;
            mp[i] = -1, mp[j] = 1;
            push(pp, plus);
            push(mm, plus);
            push(pm, minus);
            push(mp, minus);
        }
    return set;
}

}  // namespace

TransitionRow transition_row(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                             double t, std::size_t node, const EmpiricalMeasure& m, const Point& alpha) {
    const std::size_t d = lattice.dim();
    const Point x = lattice.node(node);
    const MoveSet set = jump_rates(problem, d, steps.h1, t, x, m, alpha);
    const Lattice::MultiIndex idx = lattice.multi_index(node);

    TransitionRow row;
    row.source = node;
    row.entries[0] = Transition{node, 0.0};
    row.count = 1;
    double moved = 0.0;
    for (std::size_t s = 0; s < set.count; ++s) {
        const double p = set.moves[s].rate * steps.h2;
        if (p <= 0.0) continue;
        moved += p;
        Lattice::MultiIndex target{};
        bool clamped = false;
        for (std::size_t i = 0; i < d; ++i) {
            const long v = static_cast<long>(idx[i]) + set.moves[s].offset[i];
            const long top = static_cast<long>(lattice.count(i)) - 1;
            if (v < 0 || v > top) clamped = true;
            target[i] = static_cast<std::size_t>(std::clamp(v, 0L, top));
        }
        if (clamped) row.clamped_mass += p;
        const std::size_t flat = lattice.flat_index(target);
        bool merged = false;
        for (std::size_t e = 0; e < row.count; ++e)
            if (row.entries[e].target == flat) {
                row.entries[e].probability += p;
                merged = true;
                break;
            }
        if (!merged) row.entries[row.count++] = Transition{flat, p};
    }
    const double self = 1.0 - moved;
    if (self < -1e-12)
        throw Error(ErrorCode::NegativeProbability,
                    "self-loop probability " + std::to_string(self) + " at node " + std::to_string(node) +
                        "; reduce h2 or enlarge h1");
    row.entries[0].probability += std::max(self, 0.0);
    return row;
}

ConsistencyReport check_local_consistency(const TransitionRow& row, const MfgProblem& problem,
                                          const Lattice& lattice, const StepSizes& steps, double t,
                                          const EmpiricalMeasure& m, const Point& alpha) {
    const std::size_t d = lattice.dim();
    const Point x = lattice.node(row.source);
    ConsistencyReport r;
    r.mean = Point(d);
    r.covariance = SmallMatrix(d);
    SmallMatrix second(d);
    for (const auto& e : row.targets()) {
        const Point dx = lattice.node(e.target) - x;
        r.mean += dx * e.probability;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) second(i, j) += e.probability * dx[i] * dx[j];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) r.covariance(i, j) = second(i, j) - r.mean[i] * r.mean[j];

    const Point b = problem.drift(t, x, m, alpha);
    const SmallMatrix a = problem.chain_covariance(t, x);
    r.expected_mean = b * steps.h2;
    r.expected_covariance = SmallMatrix(d);
    for (std::size_t i = 0; i < d; ++i) {
        r.mean_error = std::max(r.mean_error, std::abs(r.mean[i] - r.expected_mean[i]));
        for (std::size_t j = 0; j < d; ++j) {
            r.expected_covariance(i, j) = a(i, j) * steps.h2;
            r.covariance_error =
                std::max(r.covariance_error, std::abs(r.covariance(i, j) - r.expected_covariance(i, j)));
        }
    }
    const double scale = b.norm() + 1.0;
    r.covariance_tolerance = 2.0 * scale * scale * steps.h1 * steps.h2;
    r.pass = r.mean_error <= 1e-10 && r.covariance_error <= r.covariance_tolerance;
    return r;
}

ControlGrid make_control_grid(const Box& controls, std::size_t points_per_axis) {
    if (points_per_axis == 0) throw Error(ErrorCode::EmptyControlGrid, "control grid needs at least one point per axis");
    const std::size_t k = controls.dim();
    std::size_t total = 1;
    for (std::size_t i = 0; i < k; ++i) total *= points_per_axis;
    ControlGrid grid;
    grid.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Point a(k);
        std::size_t rem = flat;
        for (std::size_t i = k; i-- > 0;) {
            const std::size_t j = rem % points_per_axis;
            rem /= points_per_axis;
            a[i] = points_per_axis == 1
                       ? 0.5 * (controls.lower[i] + controls.upper[i])
                       : controls.lower[i] + (controls.upper[i] - controls.lower[i]) * static_cast<double>(j) /
                                                 static_cast<double>(points_per_axis - 1);
        }
        grid.push_back(a);
    }
    return grid;
}

const EmpiricalMeasure& measure_at(const MeasurePath& path, const StepSizes& steps, std::size_t n) {
    if (path.empty()) throw Error(ErrorCode::LengthMismatch, "empty measure path");
    if (path.size() == steps.n_time + 1) return path[n];
    if (path.size() == 1) return path.front();
    const std::size_t coarse = path.size() - 1;
    if (steps.n_time % coarse != 0)
        throw Error(ErrorCode::LengthMismatch, "measure path length " + std::to_string(path.size()) +
                                                   " does not match " + std::to_string(steps.n_time) + " time steps");
    return path[n / (steps.n_time / coarse)];
}

namespace {

void check_path(const MeasurePath& m_path, const StepSizes& steps) {
    (void)measure_at(m_path, steps, 0);
}

}  // namespace

DpResult dp_backward_sweep(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                           const MeasurePath& m_path, const ControlGrid& control_grid, std::size_t start_index) {
    if (control_grid.empty()) throw Error(ErrorCode::EmptyControlGrid, "dynamic program needs a nonempty control grid");
    check_path(m_path, steps);
    const std::size_t n_time = steps.n_time;
    DpResult out{ValueTable(n_time + 1, lattice.size()),
                 GridControlField(n_time, lattice.size(), control_grid.front())};

    const EmpiricalMeasure& terminal = measure_at(m_path, steps, n_time);
    for (std::size_t i = 0; i < lattice.size(); ++i)
        out.values.at(n_time, i) = problem.terminal_cost(lattice.node(i), terminal);

    for (std::size_t n = n_time; n-- > start_index;) {
        const double t = steps.time(n);
        const EmpiricalMeasure& m = measure_at(m_path, steps, n);
        const auto next = out.values.layer(n + 1);
        detail::parallel_for(lattice.size(), [&](std::size_t i) {
            const Point x = lattice.node(i);
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_index = 0;
            for (std::size_t c = 0; c < control_grid.size(); ++c) {
                const Point& alpha = control_grid[c];
                const TransitionRow row = transition_row(problem, lattice, steps, t, i, m, alpha);
                double value = problem.running_cost(t, x, m, alpha) * steps.h2;
                for (const auto& e : row.targets()) value += e.probability * next[e.target];
                if (c == 0 || value < best - 1e-12 * std::max(1.0, std::abs(best))) {
                    best = value;
                    best_index = c;
                }
            }
            out.values.at(n, i) = best;
            out.controls.at(n, i) = control_grid[best_index];
        });
    }
    return out;
}

ValueTable evaluate_controls(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                             const MeasurePath& m_path, const GridControlField& controls) {
    check_path(m_path, steps);
    if (controls.layers() != steps.n_time || controls.nodes() != lattice.size())
        throw Error(ErrorCode::LengthMismatch, "control field shape does not match lattice and time grid");
    const std::size_t n_time = steps.n_time;
    ValueTable values(n_time + 1, lattice.size());
    const EmpiricalMeasure& terminal = measure_at(m_path, steps, n_time);
    for (std::size_t i = 0; i < lattice.size(); ++i)
        values.at(n_time, i) = problem.terminal_cost(lattice.node(i), terminal);

    for (std::size_t n = n_time; n-- > 0;) {
        const double t = steps.time(n);
        const EmpiricalMeasure& m = measure_at(m_path, steps, n);
        const auto next = values.layer(n + 1);
        detail::parallel_for(lattice.size(), [&](std::size_t i) {
            const Point& alpha = controls.at(n, i);
            const TransitionRow row = transition_row(problem, lattice, steps, t, i, m, alpha);
            double value = problem.running_cost(t, lattice.node(i), m, alpha) * steps.h2;
            for (const auto& e : row.targets()) value += e.probability * next[e.target];
            values.at(n, i) = value;
        });
    }
    return values;
}

double max_jump_rate(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                     const MeasurePath& m_path, const ControlGrid& control_grid) {
    check_path(m_path, steps);
    std::vector<double> per_layer(steps.n_time, 0.0);
    detail::parallel_for(steps.n_time, [&](std::size_t n) {
        const double t = steps.time(n);
        const EmpiricalMeasure& m = measure_at(m_path, steps, n);
        double worst = 0.0;
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            const Point x = lattice.node(i);
            for (const auto& alpha : control_grid) {
                const MoveSet set = jump_rates(problem, lattice.dim(), steps.h1, t, x, m, alpha);
                double rate = 0.0;
                for (std::size_t s = 0; s < set.count; ++s) rate += set.moves[s].rate;
                worst = std::max(worst, rate);
            }
        }
        per_layer[n] = worst;
    });
    double worst = 0.0;
    for (double r : per_layer) worst = std::max(worst, r);
    return worst;
}

void check_feasibility(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                       const MeasurePath& m_path, const ControlGrid& control_grid) {
    const double rate = max_jump_rate(problem, lattice, steps, m_path, control_grid);
    if (rate * steps.h2 > 1.0 + 1e-12)
        throw Error(ErrorCode::NegativeProbability,
                    "time step " + std::to_string(steps.h2) + " exceeds the stable bound " +
                        std::to_string(1.0 / rate) + " for spacing " + std::to_string(steps.h1));
}

}  // namespace hmfg
