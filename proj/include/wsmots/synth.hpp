#pragma once

#include <cstdint>
#include <vector>

#include "wsmots/annotations.hpp"
#include "wsmots/tracking.hpp"

namespace wsmots {

/// Object `object` (0-based) is absent for frames [start, start + length).
struct SynthGap {
  int object = 0;
  int start = 0;
  int length = 0;
};

/// From `frame` on, the detections of `object` draw their embeddings from
/// a fresh cluster.
struct SynthIdSwitch {
  int object = 0;
  int frame = 0;
};

struct SynthConfig {
  int frames = 20;
  int objects = 4;
  int width = 256;
  int height = 128;
  double motion = 2.0;  ///< px per frame
  std::uint64_t seed = 1;
  double occlusion = 0.0;  ///< per object and frame chance of being absent
  double box_noise = 0.0;  ///< std of the detection box jitter, px
  double emb_noise = 0.0;  ///< std of the per-component embedding noise
  int erode = 0;           ///< 4-neighbour erosions of detection masks
  std::vector<SynthGap> gaps;
  std::vector<SynthIdSwitch> id_switches;

  void validate() const;
};

struct SynthSequence {
  /// Strict KITTI ids: class * 1000 + object index + 1.
  std::vector<FrameAnnotations> gt;
  /// One detection per visible object and frame, score 1, no track id.
  std::vector<TrackObservation> detections;
};

/// Bouncing rectangles and ellipses of alternating class (car, pedestrian).
/// Smaller objects are drawn in front and are smaller in both dimensions.
/// Geometry, occlusion draws and noise use separate streams of `seed`, so
/// changing a noise level leaves the scene itself unchanged.
SynthSequence synthesize(const SynthConfig& cfg);

}  // namespace wsmots
