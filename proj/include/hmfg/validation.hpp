#pragma once

#include <ostream>

namespace hmfg {

/// Quick self-checks of the numerical invariants: Riccati closed form vs
/// ODE, chain consistency, Wasserstein vs brute force, backprop vs finite
/// differences, projected KW on a quadratic and config round trip. Prints
/// one line per suite; true when all pass.
bool run_validation(std::ostream& out);

}  // namespace hmfg
