#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wsmots {

/// ||a - b||_2 / max(||a||_2, ||b||_2); 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  int instances = 0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed() const;
};

struct GradcheckOptions {
  std::uint64_t seed = 1;
  int instances = 10;
  /// Perturb the analytic gradients so every check must fail.
  bool corrupt = false;
};

inline constexpr double kLocTolerance = 1e-5;
inline constexpr double kCrfTolerance = 1e-4;
inline constexpr double kTripletTolerance = 1e-5;

/// Central-difference checks of loc_loss (grids up to 16x16), crf_loss on
/// the dense and the lattice operator (up to 16x16, two classes) and
/// triplet_loss (batches of up to 12 embeddings of length 8).
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace wsmots
