#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wsmots/annotations.hpp"
#include "wsmots/crf_loss.hpp"
#include "wsmots/gradcam.hpp"
#include "wsmots/tracking.hpp"
#include "wsmots/weak_labels.hpp"

namespace wsmots::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInputError = 2;

/// Entry point of the `wsmots` tool. Subcommands: eval, track, losses,
/// gradcheck, synth. Errors are reported on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, without the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat "key = value" file; '#' starts a comment. Recognised keys:
/// embedding_dim, triplet_margin, lambda_crf, mu_a, window, det_thresh,
/// sigma_xy, sigma_rgb. Throws FormatError on unknown keys or bad lines.
std::map<std::string, std::string> parse_config(std::string_view text);

// track

/// KITTI MOTS prediction frames from tracked detections: obj_id is the
/// track id. Where masks overlap, the pixel goes to the higher score, ties to
/// the earlier detection. Throws InvalidArgument for detections without a
/// mask or identity and ShapeError when masks of one frame differ in size.
std::vector<FrameAnnotations> tracks_to_kitti(std::span<const TrackObservation> tracked);

/// RGB rendering of one frame, masks coloured by track id.
struct OverlayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;
};
OverlayImage render_overlay(const FrameAnnotations& frame);
std::string encode_png(const OverlayImage& image);

// losses

/// Tensors of a loss batch directory, `<name>.blob` each:
///   pred_masks [R,H,W]       foreground probabilities on the ROI grid
///   rois [R,4], gt_boxes [G,4], matches [R], frame_size [2] (h, w)
///   heatmaps [R,h,w]          normalised maps in [0,1], or
///   activations, gradients [R,C,h,w]  for Grad-CAM
///   patches [R,P,Q,3]         optional RGB patches in [0,1] (CRF loss)
///   embeddings [B,D], ids [B] optional (triplet loss)
struct LossBatch {
  std::vector<ProbMask> pred_masks;
  std::vector<BBox> rois;
  std::vector<BBox> gt_boxes;
  std::vector<std::size_t> matches;
  FrameSize frame;
  std::vector<Heatmap> heatmaps;
  std::vector<RgbImage> patches;
  std::vector<TrackObservation> embeddings;
};

LossBatch load_loss_batch(const std::filesystem::path& dir,
                          GradCamVariant variant = GradCamVariant::Absolute);

struct LossOptions {
  WeakLabelConfig labels;
  double lambda_crf = 2e-7;
  double margin = 0.2;
  AffinityParams affinity;
  AffinityPath path = AffinityPath::Fast;
  Execution exec = Execution::Parallel;
};

struct LossBundle {
  double l_loc = 0.0;
  double l_crf = 0.0;
  double l_t = 0.0;
  double lambda_crf = 2e-7;
  /// d l_msk / d pred_masks, one grid per ROI.
  std::vector<Grid<double>> grad_masks;
  /// d l_t / d embeddings, one vector per embedding.
  std::vector<std::vector<double>> grad_embeddings;

  double l_msk() const noexcept { return l_loc + lambda_crf * l_crf; }
};

/// Batch means of the localisation and CRF losses over ROIs (the CRF term
/// is 0 without patches) and the triplet loss over the embeddings.
LossBundle compute_losses(const LossBatch& batch, const LossOptions& options = {});

}  // namespace wsmots::cli
