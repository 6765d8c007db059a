#pragma once

#include <vector>

#include "wsmots/rle.hpp"

namespace wsmots {

/// KITTI MOTS class codes.
inline constexpr int kClassCar = 1;
inline constexpr int kClassPedestrian = 2;
inline constexpr int kClassIgnore = 10;
inline constexpr int kIgnoreObjectId = 10000;

struct Instance {
  int track_id = 0;
  int class_id = 0;
  RleMask mask;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// All masks of one frame. Instance masks must not overlap.
struct FrameAnnotations {
  int frame = 0;
  std::vector<Instance> instances;
  std::vector<RleMask> ignore_regions;

  friend bool operator==(const FrameAnnotations&, const FrameAnnotations&) = default;
};

}  // namespace wsmots
