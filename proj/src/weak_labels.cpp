#include "wsmots/weak_labels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsmots/reduce.hpp"

namespace wsmots {

void WeakLabelConfig::validate() const {
  if (!(mu_a >= 0.0 && mu_a <= 1.0)) {
    throw InvalidArgument("mu_a must lie in [0,1], got " + std::to_string(mu_a));
  }
}

PseudoLabel make_pseudo_label(const Heatmap& heatmap, const BBox& roi,
                              std::span<const BBox> gt_boxes, std::size_t matched,
                              FrameSize frame, const WeakLabelConfig& cfg) {
  cfg.validate();
  if (heatmap.empty()) throw ShapeError("empty heatmap");
  if (matched >= gt_boxes.size()) {
    throw InvalidArgument("matched box index " + std::to_string(matched) + " out of range");
  }
  if (roi.x1 <= 0 || roi.y1 <= 0 || roi.x0 >= frame.width || roi.y0 >= frame.height) {
    throw InvalidArgument("ROI box is disjoint from the frame");
  }

  const int rows = heatmap.height();
  const int cols = heatmap.width();
  const BBox& own = gt_boxes[matched];
  PseudoLabel label(rows, cols, LabelCell::Background);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const Point2 p = roi_cell_center(roi, rows, cols, i, j);
      const LabelCell by_heatmap =
          heatmap(i, j) >= cfg.mu_a ? LabelCell::Foreground : LabelCell::Void;
      if (own.contains(p.x, p.y)) {
        label(i, j) = by_heatmap;
        continue;
      }
      const bool in_other = std::any_of(gt_boxes.begin(), gt_boxes.end(),
                                        [&](const BBox& b) { return b.contains(p.x, p.y); });
      if (!in_other) continue;
      switch (cfg.foreign_box) {
        case ForeignBoxPolicy::Void:
          label(i, j) = LabelCell::Void;
          break;
        case ForeignBoxPolicy::Background:
          break;
        case ForeignBoxPolicy::Heatmap:
          label(i, j) = by_heatmap;
          break;
      }
    }
  }
  return label;
}

LossGrad loc_loss(const PseudoLabel& label, const Grid<double>& pred) {
  require_same_shape(label, pred, "loc_loss");
  LossGrad out{0.0, Grid<double>(pred.height(), pred.width(), 0.0)};
  std::size_t active = 0;
  for (auto cell : label.values()) active += cell != LabelCell::Void ? 1 : 0;
  if (active == 0) return out;

  const double inv = 1.0 / static_cast<double>(active);
  std::vector<double> terms;
  terms.reserve(active);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const LabelCell cell = label[i];
    if (cell == LabelCell::Void) continue;
    const double s = std::clamp(pred[i], kProbEpsilon, 1.0 - kProbEpsilon);
    if (cell == LabelCell::Foreground) {
      terms.push_back(-std::log(s));
      out.grad[i] = -inv / s;
    } else {
      terms.push_back(-std::log1p(-s));
      out.grad[i] = inv / (1.0 - s);
    }
  }
  out.loss = pairwise_sum(terms) * inv;
  return out;
}

double batch_loc_loss(std::span<const LocItem> items, Execution exec) {
  std::vector<double> losses(items.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  if (exec == Execution::Parallel) {
    // Shape errors are detected up front so nothing throws inside the region.
    for (const auto& it : items) require_same_shape(it.label, it.pred, "batch_loc_loss");
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      losses[static_cast<std::size_t>(i)] =
          loc_loss(items[static_cast<std::size_t>(i)].label, items[static_cast<std::size_t>(i)].pred).loss;
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      losses[static_cast<std::size_t>(i)] =
          loc_loss(items[static_cast<std::size_t>(i)].label, items[static_cast<std::size_t>(i)].pred).loss;
    }
  }
  return pairwise_mean(losses);
}

}  // namespace wsmots
