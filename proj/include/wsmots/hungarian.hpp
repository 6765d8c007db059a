#pragma once

#include <span>
#include <vector>

namespace wsmots {

/// Minimum-cost assignment of every row to a distinct column of a row-major
/// rows x cols cost matrix (rows <= cols). Returns the column of each row.
/// Shortest augmenting paths with potentials, O(rows^2 cols).
std::vector<int> solve_assignment(std::span<const double> cost, int rows, int cols);

}  // namespace wsmots
