#pragma once

#include <vector>

#include "wsmots/grid.hpp"

namespace wsmots {

/// Per-ROI localisation map, min-max normalised to [0,1].
class Heatmap : public Grid<double> {
 public:
  Heatmap() = default;
  Heatmap(int height, int width, double fill = 0.0) : Grid<double>(height, width, fill) {}
  explicit Heatmap(Grid<double> g) : Grid<double>(std::move(g)) {}
};

/// Activations A^k and gradients dy^c/dA^k exported by the host network for
/// one ROI, stored channel-major (k, row, col). Whether y^c is taken before
/// or after the softmax is the exporter's choice; the arithmetic is the same.
struct GradCamInput {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> activations;
  std::vector<double> gradients;
  int class_id = 0;

  /// Throws ShapeError unless both tensors hold channels*height*width values
  /// and channels >= 1.
  void validate() const;
};

enum class GradCamVariant {
  Original,  ///< ReLU(sum_k alpha_k A^k)
  Absolute,  ///< sum_k |alpha_k| A^k, no ReLU
};

/// Spatial mean of each gradient channel.
std::vector<double> gradcam_weights(const GradCamInput& input);

/// Raw (unnormalised) map for the chosen variant.
Grid<double> gradcam_raw(const GradCamInput& input, GradCamVariant variant);

Heatmap gradcam(const GradCamInput& input, GradCamVariant variant = GradCamVariant::Absolute);

/// (x - min) / (max - min); all zeros when the map is constant.
Heatmap normalize_minmax(const Grid<double>& raw);

}  // namespace wsmots
