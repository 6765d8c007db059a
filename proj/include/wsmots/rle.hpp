#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsmots/mask.hpp"

namespace wsmots {

/// Compressed COCO-style run-length mask. Runs follow a column-major scan
/// and the first run always counts zeros.
struct RleMask {
  int height = 0;
  int width = 0;
  std::string counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

/// Column-major run lengths of `m`, starting with a (possibly empty) run of zeros.
std::vector<std::uint32_t> mask_to_runs(const BinaryMask& m);
BinaryMask runs_to_mask(std::span<const std::uint32_t> runs, int height, int width);

/// COCO string codec: each run is delta-coded against the run two places
/// back (from the fourth run on) and emitted as little-endian 5-bit groups
/// with 0x20 as the continuation flag and 0x10 as the sign bit of the last
/// group, offset by 48.
std::string compress_runs(std::span<const std::uint32_t> runs);
/// Inverse of compress_runs. Throws FormatError on bad characters,
/// truncated groups or negative runs.
std::vector<std::uint32_t> decompress_counts(std::string_view counts);

RleMask rle_encode(const BinaryMask& m);
/// Throws FormatError when the runs do not cover exactly height x width pixels.
BinaryMask rle_decode(const RleMask& r);

/// Number of foreground pixels, computed without decoding.
std::uint64_t rle_area(const RleMask& r);

}  // namespace wsmots
