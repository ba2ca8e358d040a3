#pragma once

#include <functional>

#include "hmfg/lattice.hpp"

namespace hmfg {

/// Feedback control (t, x, m_t) -> alpha in U. Must be pure: simulations
/// call it concurrently.
using ControlPolicy = std::function<Point(double t, const Point& x, const EmpiricalMeasure& m)>;

/// Nearest-node lookup into a grid control field whose layers are spaced
/// by `field_steps.h2`. Times past the last layer use the last layer.
ControlPolicy grid_policy(const Lattice& lattice, const StepSizes& field_steps, const GridControlField& field);

ControlPolicy constant_policy(const Point& alpha);

/// Samples a policy onto the lattice at the layers of `steps`.
GridControlField tabulate_policy(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                                 const MeasurePath& m_path, const ControlPolicy& policy);

}  // namespace hmfg
