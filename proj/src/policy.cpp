#include "hmfg/policy.hpp"

#include <cmath>

#include "hmfg/error.hpp"
#include "parallel.hpp"

namespace hmfg {

ControlPolicy grid_policy(const Lattice& lattice, const StepSizes& field_steps, const GridControlField& field) {
    if (field.nodes() != lattice.size() || field.layers() == 0)
        throw Error(ErrorCode::LengthMismatch, "control field does not match the lattice");
    return [lattice, field_steps, field](double t, const Point& x, const EmpiricalMeasure&) {
        const double pos = std::floor(t / field_steps.h2 + 1e-9);
        const std::size_t n =
            pos <= 0.0 ? 0 : std::min(field.layers() - 1, static_cast<std::size_t>(pos));
        return field.at(n, lattice.nearest(x));
    };
}

ControlPolicy constant_policy(const Point& alpha) {
    return [alpha](double, const Point&, const EmpiricalMeasure&) { return alpha; };
}

GridControlField tabulate_policy(const MfgProblem& problem, const Lattice& lattice, const StepSizes& steps,
                                 const MeasurePath& m_path, const ControlPolicy& policy) {
    GridControlField field(steps.n_time, lattice.size(), problem.controls.midpoint());
    for (std::size_t n = 0; n < steps.n_time; ++n) {
        const EmpiricalMeasure& m = measure_at(m_path, steps, n);
        const double t = steps.time(n);
        detail::parallel_for(lattice.size(), [&](std::size_t i) { field.at(n, i) = policy(t, lattice.node(i), m); });
    }
    return field;
}

}  // namespace hmfg
