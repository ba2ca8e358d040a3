#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "hmfg/measure.hpp"
#include "hmfg/problem.hpp"
#include "hmfg/types.hpp"

namespace hmfg {

/// State spacing h1, time step h2 and the number of time steps T / h2.
struct StepSizes {
    double h1 = 0.0;
    double h2 = 0.0;
    std::size_t n_time = 0;

    /// Validates that h2 tiles the horizon (to 1e-12).
    static StepSizes make(double horizon, double h1, double h2);

    double horizon() const { return static_cast<double>(n_time) * h2; }
    double time(std::size_t n) const { return static_cast<double>(n) * h2; }
    /// Nearest time index to t (the start index of a cost sum).
    std::size_t index_of(double t) const;
};

/// Regular grid over a box with equal spacing on every axis. Flat indices
/// are row-major with the last axis varying fastest.
class Lattice {
public:
    using MultiIndex = std::array<std::size_t, kMaxDim>;

    Lattice() = default;
    static Lattice over(const Box& box, double h1);

    std::size_t dim() const { return box_.dim(); }
    std::size_t size() const { return size_; }
    double spacing() const { return h1_; }
    const Box& box() const { return box_; }
    std::size_t count(std::size_t axis) const { return counts_[axis]; }

    Point node(std::size_t flat) const;
    MultiIndex multi_index(std::size_t flat) const;
    std::size_t flat_index(const MultiIndex& idx) const;
    /// Nearest node to x after clamping into the box.
    std::size_t nearest(const Point& x) const;
    bool on_boundary(std::size_t flat) const;

private:
    Box box_;
    double h1_ = 0.0;
    std::array<std::size_t, kMaxDim> counts_{};
    std::array<std::size_t, kMaxDim> strides_{};
    std::size_t size_ = 0;
};

/// Lattice over the problem's domain with spacing steps.h1. Throws
/// NonDivisibleDomain when h1 does not tile an axis to 1e-9.
Lattice build_lattice(const MfgProblem& problem, const StepSizes& steps);

// Self loop, 2d axis moves and 2d(d-1) diagonal moves.
inline constexpr std::size_t kMaxStencil = 1 + 2 * kMaxDim + 2 * kMaxDim * (kMaxDim - 1);

struct Transition {
    std::size_t target = 0;
    double probability = 0.0;
};

/// Locally consistent one-step law of the approximating chain from one node.
struct TransitionRow {
    std::size_t source = 0;
    std::array<Transition, kMaxStencil> entries{};
    std::size_t count = 0;
    /// Probability mass whose unclamped target fell outside the box.
    double clamped_mass = 0.0;

    std::span<const Transition> targets() const { return {entries.data(), count}; }
    double total() const;
};

/// Builds the chain's transition probabilities from node `node` at time t
/// under control `alpha`:
///   P(x, x +- h1 e_i) = (a_ii/2 - sum_{j!=i} |a_ij|/2 + b_i^{+-} h1) h2 / h1^2
///   P(x, x + h1 e_i + h1 e_j) = P(x, x - h1 e_i - h1 e_j) = a_ij^+ h2 / (2 h1^2)
///   P(x, x + h1 e_i - h1 e_j) = P(x, x - h1 e_i + h1 e_j) = a_ij^- h2 / (2 h1^2)
/// with the remaining mass on the self loop, where a is the problem's
/// chain_covariance. Off-grid targets are clamped to
/// the nearest in-box node and merged. Throws NegativeProbability when any
/// entry falls below -1e-12.
TransitionRow transition_row(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                             double t, std::size_t node, const EmpiricalMeasure& m, const Point& alpha);

struct ConsistencyReport {
    Point mean;            // sum P dx
    SmallMatrix covariance;  // sum P dx dx^T - mean mean^T
    Point expected_mean;   // b h2
    SmallMatrix expected_covariance;  // a h2
    double mean_error = 0.0;
    double covariance_error = 0.0;
    double covariance_tolerance = 0.0;  // 2 (|b| + 1)^2 h1 h2
    bool pass = false;
};

ConsistencyReport check_local_consistency(const TransitionRow& row, const MfgProblem& problem,
                                          const Lattice& lattice, const StepSizes& steps, double t,
                                          const EmpiricalMeasure& m, const Point& alpha);

/// Values indexed by (time index 0..n_time, flat node).
class ValueTable {
public:
    ValueTable() = default;
    ValueTable(std::size_t n_layers, std::size_t n_nodes, double fill = 0.0)
        : layers_(n_layers), nodes_(n_nodes), values_(n_layers * n_nodes, fill) {}

    std::size_t layers() const { return layers_; }
    std::size_t nodes() const { return nodes_; }
    double& at(std::size_t n, std::size_t i) { return values_[n * nodes_ + i]; }
    double at(std::size_t n, std::size_t i) const { return values_[n * nodes_ + i]; }
    std::span<double> layer(std::size_t n) { return {values_.data() + n * nodes_, nodes_}; }
    std::span<const double> layer(std::size_t n) const { return {values_.data() + n * nodes_, nodes_}; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

private:
    std::size_t layers_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> values_;
};

/// Controls indexed by (time index 0..n_time-1, flat node).
class GridControlField {
public:
    GridControlField() = default;
    GridControlField(std::size_t n_layers, std::size_t n_nodes, const Point& fill)
        : layers_(n_layers), nodes_(n_nodes), controls_(n_layers * n_nodes, fill) {}

    std::size_t layers() const { return layers_; }
    std::size_t nodes() const { return nodes_; }
    Point& at(std::size_t n, std::size_t i) { return controls_[n * nodes_ + i]; }
    const Point& at(std::size_t n, std::size_t i) const { return controls_[n * nodes_ + i]; }
    const std::vector<Point>& controls() const { return controls_; }

    friend bool operator==(const GridControlField&, const GridControlField&) = default;

private:
    std::size_t layers_ = 0;
    std::size_t nodes_ = 0;
    std::vector<Point> controls_;
};

/// Finite subset of U searched by the dynamic program, in lexicographic order.
using ControlGrid = std::vector<Point>;

/// `points_per_axis` equispaced values on every control axis, enumerated
/// lexicographically.
ControlGrid make_control_grid(const Box& controls, std::size_t points_per_axis);

/// Measure slice used at time index n. The path may be on a coarser time
/// grid than `steps` as long as its step count divides n_time.
const EmpiricalMeasure& measure_at(const MeasurePath& path, const StepSizes& steps, std::size_t n);

struct DpResult {
    ValueTable values;
    GridControlField controls;
};

/// Backward dynamic program with grid-search control:
///   v(n, x) = min_a [ sum_z P(x, z | a) v(n+1, z) + f(t_n, x, m_n, a) h2 ],
///   v(N, x) = g(x, m_N).
/// Near-ties (within 1e-12 relative) go to the lexicographically smallest
/// control. Layers below `start_index` are left at zero.
DpResult dp_backward_sweep(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                           const MeasurePath& m_path, const ControlGrid& control_grid,
                           std::size_t start_index = 0);

/// Value of a fixed feedback control field: the same recursion without the
/// minimization.
ValueTable evaluate_controls(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                             const MeasurePath& m_path, const GridControlField& controls);

/// Largest total off-diagonal jump rate (probability per unit h2) over all
/// nodes, times and grid controls. A time step h2 is feasible iff
/// h2 * rate <= 1. Throws NegativeProbability when a row is infeasible for
/// every h2 (diagonal dominance failure).
double max_jump_rate(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                     const MeasurePath& m_path, const ControlGrid& control_grid);

/// Throws NegativeProbability unless every (time, node, grid control) row is
/// a probability vector.
void check_feasibility(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                       const MeasurePath& m_path, const ControlGrid& control_grid);

}  // namespace hmfg
