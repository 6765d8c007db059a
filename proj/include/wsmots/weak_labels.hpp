#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wsmots/execution.hpp"
#include "wsmots/gradcam.hpp"
#include "wsmots/mask.hpp"

namespace wsmots {

enum class LabelCell : std::uint8_t { Background = 0, Foreground = 1, Void = 2 };

using PseudoLabel = Grid<LabelCell>;

/// Treatment of ROI cells that fall inside another object's box but not
/// inside the box the ROI was matched to.
enum class ForeignBoxPolicy {
  Void,        ///< ignore them (default)
  Background,  ///< label them 0
  Heatmap,     ///< threshold the ROI's own heatmap there as well
};

struct WeakLabelConfig {
  double mu_a = 0.5;
  ForeignBoxPolicy foreign_box = ForeignBoxPolicy::Void;

  void validate() const;
};

struct FrameSize {
  int height = 0;
  int width = 0;
};

/// Trinary pseudo label on the ROI grid of `roi`.
///
/// `heatmap` is the normalised map G^r of the matched ground-truth box
/// `gt_boxes[matched]`, already resampled onto the ROI grid; its shape sets
/// the label shape. Each cell is classified by the frame position of its
/// centre: outside every ground-truth box it is background; inside the
/// matched box it is foreground when G >= mu_a and void otherwise; inside
/// only other boxes it follows `cfg.foreign_box`.
PseudoLabel make_pseudo_label(const Heatmap& heatmap, const BBox& roi,
                              std::span<const BBox> gt_boxes, std::size_t matched,
                              FrameSize frame, const WeakLabelConfig& cfg = {});

/// Lower clamp applied to predictions before taking logs.
inline constexpr double kProbEpsilon = 1e-7;

struct LossGrad {
  double loss = 0.0;
  Grid<double> grad;
};

/// Cross-entropy over the non-void cells, averaged by their count.
/// The gradient is taken w.r.t. the clamped prediction and is 0 on void cells.
LossGrad loc_loss(const PseudoLabel& label, const Grid<double>& pred);

struct LocItem {
  PseudoLabel label;
  ProbMask pred;
};

/// Mean of loc_loss over proposals; 0 for an empty batch.
double batch_loc_loss(std::span<const LocItem> items, Execution exec = Execution::Parallel);

}  // namespace wsmots
