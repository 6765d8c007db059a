#include "wsmots/hungarian.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "wsmots/error.hpp"

namespace wsmots {

std::vector<int> solve_assignment(std::span<const double> cost, int rows, int cols) {
  if (rows < 0 || cols < 0 || rows > cols) {
    throw InvalidArgument("assignment needs 0 <= rows <= cols, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (cost.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ShapeError("assignment cost matrix has " + std::to_string(cost.size()) + " entries, expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (double c : cost) {
    if (!std::isfinite(c)) throw InvalidArgument("assignment costs must be finite");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(rows);
  const auto m = static_cast<std::size_t>(cols);
  auto at = [&](std::size_t i, std::size_t j) { return cost[(i - 1) * m + (j - 1)]; };

  // 1-based; column 0 is the virtual root of each augmenting search.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = at(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) assignment[owner[j] - 1] = static_cast<int>(j - 1);
  }
  return assignment;
}

}  // namespace wsmots
