#include "wsmots/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wsmots {

void GradCamInput::validate() const {
  if (channels < 1) throw ShapeError("Grad-CAM needs at least one channel");
  if (height < 1 || width < 1) throw ShapeError("Grad-CAM maps must be non-empty");
  const std::size_t n = static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
                        static_cast<std::size_t>(width);
  if (activations.size() != n || gradients.size() != n) {
    throw ShapeError("Grad-CAM tensors: expected " + std::to_string(n) + " values, got " +
                     std::to_string(activations.size()) + " activations and " +
                     std::to_string(gradients.size()) + " gradients");
  }
}

std::vector<double> gradcam_weights(const GradCamInput& input) {
  input.validate();
  const std::size_t plane = static_cast<std::size_t>(input.height) * input.width;
  std::vector<double> alpha(static_cast<std::size_t>(input.channels), 0.0);
  for (int k = 0; k < input.channels; ++k) {
    const double* g = input.gradients.data() + static_cast<std::size_t>(k) * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += g[i];
    alpha[static_cast<std::size_t>(k)] = sum / static_cast<double>(plane);
  }
  return alpha;
}

Grid<double> gradcam_raw(const GradCamInput& input, GradCamVariant variant) {
  const auto alpha = gradcam_weights(input);
  const std::size_t plane = static_cast<std::size_t>(input.height) * input.width;
  Grid<double> raw(input.height, input.width, 0.0);
  for (int k = 0; k < input.channels; ++k) {
    const double w = variant == GradCamVariant::Absolute ? std::abs(alpha[static_cast<std::size_t>(k)])
                                                         : alpha[static_cast<std::size_t>(k)];
    const double* a = input.activations.data() + static_cast<std::size_t>(k) * plane;
    for (std::size_t i = 0; i < plane; ++i) raw[i] += w * a[i];
  }
  if (variant == GradCamVariant::Original) {
    for (double& v : raw.values()) v = std::max(v, 0.0);
  }
  return raw;
}

Heatmap gradcam(const GradCamInput& input, GradCamVariant variant) {
  return normalize_minmax(gradcam_raw(input, variant));
}

Heatmap normalize_minmax(const Grid<double>& raw) {
  Heatmap out(raw.height(), raw.width(), 0.0);
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.values().begin(), raw.values().end());
  const double min = *lo;
  const double range = *hi - min;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - min) / range;
  return out;
}

}  // namespace wsmots
