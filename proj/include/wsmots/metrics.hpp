#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "wsmots/annotations.hpp"
#include "wsmots/execution.hpp"

namespace wsmots {

/// A ground-truth/prediction pair of the same class with mask IoU > 0.5.
struct FrameMatch {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double iou = 0.0;
};

/// Matches the instances of one frame. Throws AnnotationError when masks of
/// one side overlap or the two sides disagree on the image size.
std::vector<FrameMatch> match_frame(const FrameAnnotations& gt, const FrameAnnotations& pred);

struct MetricsAccumulator {
  std::size_t gt_count = 0;
  std::size_t tp = 0;
  double soft_tp = 0.0;
  std::size_t fp = 0;
  std::size_t ids = 0;

  MetricsAccumulator& operator+=(const MetricsAccumulator& o);
};

struct MotsScores {
  double smotsa = 0.0;
  double motsa = 0.0;
  double motsp = 0.0;
};

/// Counts for `class_id` over one sequence. Frames are aligned by their
/// index and may be missing on either side. An unmatched prediction is a
/// false positive unless at least half of it lies in the ignore regions. An
/// identity switch is counted when a ground-truth track is matched to a
/// different predicted id than at its most recent previously matched frame.
MetricsAccumulator accumulate_sequence(std::span<const FrameAnnotations> gt,
                                       std::span<const FrameAnnotations> pred, int class_id,
                                       Execution exec = Execution::Parallel);

/// Throws InvalidArgument when there is no ground truth. MOTSP is 0 without TP.
MotsScores scores(const MetricsAccumulator& acc);

struct ClassResult {
  MetricsAccumulator acc;
  MotsScores scores;
};

/// Scores every class with ground truth in `gt_dir`. Each sequence is a
/// KITTI MOTS file; a missing prediction file counts as empty, a prediction
/// file without ground truth is an error.
std::map<int, ClassResult> evaluate(const std::filesystem::path& gt_dir,
                                    const std::filesystem::path& pred_dir,
                                    Execution exec = Execution::Parallel);

}  // namespace wsmots
