#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <map>
#include <numeric>
#include <string>

#include <png.h>

#include "wsmots/cli.hpp"
#include "wsmots/error.hpp"
#include "wsmots/rle.hpp"

namespace wsmots::cli {

std::vector<FrameAnnotations> tracks_to_kitti(std::span<const TrackObservation> tracked) {
  std::map<int, std::vector<std::size_t>> by_frame;
  for (std::size_t i = 0; i < tracked.size(); ++i) {
    const auto& t = tracked[i];
    if (!t.identity) throw InvalidArgument("detection in frame " + std::to_string(t.frame) + " has no track id");
    if (!t.mask) throw InvalidArgument("detection in frame " + std::to_string(t.frame) + " has no mask");
    by_frame[t.frame].push_back(i);
  }

  std::vector<FrameAnnotations> frames;
  for (const auto& [frame, members] : by_frame) {
    const int h = tracked[members.front()].mask->height;
    const int w = tracked[members.front()].mask->width;
    std::vector<std::size_t> order = members;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return tracked[a].score > tracked[b].score; });
    BinaryMask taken(h, w);
    FrameAnnotations out;
    out.frame = frame;
    for (std::size_t i : order) {
      const RleMask& rle = *tracked[i].mask;
      if (rle.height != h || rle.width != w) {
        throw ShapeError("masks of frame " + std::to_string(frame) + " differ in size");
      }
      BinaryMask m = rle_decode(rle);
      for (std::size_t p = 0; p < m.size(); ++p) {
        if (m[p] && taken[p]) m[p] = 0;
        taken[p] = static_cast<std::uint8_t>(taken[p] | m[p]);
      }
      out.instances.push_back({*tracked[i].identity, tracked[i].class_id, rle_encode(m)});
    }
    std::sort(out.instances.begin(), out.instances.end(),
              [](const Instance& a, const Instance& b) { return a.track_id < b.track_id; });
    frames.push_back(std::move(out));
  }
  return frames;
}

namespace {

std::array<std::uint8_t, 3> id_colour(int id) {
  // Golden-ratio hue walk, full saturation.
  const double hue = std::fmod(0.1 + 0.618033988749895 * id, 1.0) * 6.0;
  const double x = 1.0 - std::abs(std::fmod(hue, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(55 + 200 * v)); };
  return {q(r), q(g), q(b)};
}

}  // namespace

OverlayImage render_overlay(const FrameAnnotations& frame) {
  OverlayImage img;
  const RleMask* first = !frame.instances.empty() ? &frame.instances.front().mask
                         : !frame.ignore_regions.empty() ? &frame.ignore_regions.front()
                                                          : nullptr;
  if (!first) return img;
  img.height = first->height;
  img.width = first->width;
  img.rgb.assign(static_cast<std::size_t>(img.height) * static_cast<std::size_t>(img.width) * 3, 0);
  auto paint = [&](const RleMask& rle, std::array<std::uint8_t, 3> colour) {
    if (rle.height != img.height || rle.width != img.width) {
      throw ShapeError("masks of frame " + std::to_string(frame.frame) + " differ in size");
    }
    const BinaryMask m = rle_decode(rle);
    for (std::size_t p = 0; p < m.size(); ++p) {
      if (m[p]) std::copy(colour.begin(), colour.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(3 * p));
    }
  };
  for (const auto& ig : frame.ignore_regions) paint(ig, {96, 96, 96});
  for (const auto& inst : frame.instances) paint(inst.mask, id_colour(inst.track_id));
  return img;
}

std::string encode_png(const OverlayImage& image) {
  if (image.height <= 0 || image.width <= 0) throw InvalidArgument("cannot encode an empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::string bytes;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed");
  }
  png_set_write_fn(
      png, &bytes,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r) {
    png_write_row(png, image.rgb.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(image.width) * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return bytes;
}

}  // namespace wsmots::cli
