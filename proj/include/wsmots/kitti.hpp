#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsmots/annotations.hpp"

namespace wsmots {

/// Object id rules. Strict (ground truth): obj_id / 1000 equals the class
/// and ignore regions use class 10 with id 10000. Free (predictions): any
/// non-negative id; class 10 still marks an ignore region.
enum class KittiIds { Strict, Free };

/// Parses lines "frame obj_id class_id img_h img_w rle". Blank lines are
/// skipped. Frames come back ascending, instances sorted by object id.
/// Throws FormatError carrying the 1-based line number.
std::vector<FrameAnnotations> parse_kitti_text(std::string_view text, KittiIds ids = KittiIds::Strict);
std::vector<FrameAnnotations> parse_kitti(const std::filesystem::path& path,
                                          KittiIds ids = KittiIds::Strict);

/// One line per mask, sorted by (frame, obj_id), single-space separated.
std::string format_kitti(std::span<const FrameAnnotations> frames);
void write_kitti(std::span<const FrameAnnotations> frames, const std::filesystem::path& path);

}  // namespace wsmots
