#pragma once

#include <cstddef>
#include <span>

namespace wsmots {

/// Sum by pairwise tree reduction. The association order depends only on
/// the length, so results are reproducible however the terms were produced.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

}  // namespace wsmots
