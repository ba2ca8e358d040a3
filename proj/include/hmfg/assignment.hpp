#pragma once

#include <cstddef>
#include <vector>

namespace hmfg {

/// Exact minimum-cost perfect matching on an n x n cost matrix (row-major)
/// by the O(n^3) shortest-augmenting-path Hungarian method. Returns the
/// optimal total cost; `assignment[i]` receives the column matched to row i.
double solve_assignment(const std::vector<double>& cost, std::size_t n,
                        std::vector<std::size_t>* assignment = nullptr);

}  // namespace hmfg
