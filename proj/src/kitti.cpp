#include "wsmots/kitti.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include "wsmots/error.hpp"
#include "wsmots/fsutil.hpp"

namespace wsmots {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

int parse_int(std::string_view field, const char* name, std::size_t line) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError(std::string(name) + " is not an integer: '" + std::string(field) + "'", line);
  }
  if (value < 0) throw FormatError(std::string(name) + " is negative", line);
  return value;
}

struct FrameBuild {
  FrameAnnotations frame;
  int height = 0;
  int width = 0;
  std::set<int> ids;
};

}  // namespace

std::vector<FrameAnnotations> parse_kitti_text(std::string_view text, KittiIds ids) {
  std::map<int, FrameBuild> frames;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto f = split_fields(line);
    if (f.empty()) continue;
    if (f.size() != 6) {
      throw FormatError("expected 6 fields, found " + std::to_string(f.size()), line_no);
    }
    const int frame = parse_int(f[0], "frame", line_no);
    const int obj_id = parse_int(f[1], "object id", line_no);
    const int class_id = parse_int(f[2], "class id", line_no);
    const int height = parse_int(f[3], "image height", line_no);
    const int width = parse_int(f[4], "image width", line_no);
    if (height == 0 || width == 0) throw FormatError("empty image size", line_no);

    RleMask mask{height, width, std::string(f[5])};
    std::uint64_t covered = 0;
    try {
      for (auto r : decompress_counts(mask.counts)) covered += r;
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    }
    if (covered != static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width)) {
      throw FormatError("RLE covers " + std::to_string(covered) + " pixels, image is " +
                        std::to_string(height) + "x" + std::to_string(width), line_no);
    }

    const bool ignore = class_id == kClassIgnore;
    if (ids == KittiIds::Strict) {
      if (ignore && obj_id != kIgnoreObjectId) {
        throw FormatError("ignore region must use object id 10000", line_no);
      }
      if (!ignore && obj_id / 1000 != class_id) {
        throw FormatError("object id " + std::to_string(obj_id) + " does not belong to class " +
                          std::to_string(class_id), line_no);
      }
    }

    auto [it, inserted] = frames.try_emplace(frame);
    FrameBuild& b = it->second;
    if (inserted) {
      b.frame.frame = frame;
      b.height = height;
      b.width = width;
    } else if (b.height != height || b.width != width) {
      throw FormatError("image size differs from earlier lines of frame " + std::to_string(frame), line_no);
    }
    if (ignore) {
      b.frame.ignore_regions.push_back(std::move(mask));
    } else {
      if (!b.ids.insert(obj_id).second) {
        throw FormatError("object id " + std::to_string(obj_id) + " repeated in frame " +
                          std::to_string(frame), line_no);
      }
      b.frame.instances.push_back(Instance{obj_id, class_id, std::move(mask)});
    }
  }

  std::vector<FrameAnnotations> out;
  out.reserve(frames.size());
  for (auto& [frame, b] : frames) {
    std::sort(b.frame.instances.begin(), b.frame.instances.end(),
              [](const Instance& a, const Instance& c) { return a.track_id < c.track_id; });
    out.push_back(std::move(b.frame));
  }
  return out;
}

std::vector<FrameAnnotations> parse_kitti(const std::filesystem::path& path, KittiIds ids) {
  const std::string text = read_file(path);
  try {
    return parse_kitti_text(text, ids);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_kitti(std::span<const FrameAnnotations> frames) {
  struct Line {
    int frame;
    int obj_id;
    std::size_t order;
    int class_id;
    const RleMask* mask;
  };
  std::vector<Line> lines;
  for (const auto& f : frames) {
    for (const auto& i : f.instances) {
      lines.push_back({f.frame, i.track_id, lines.size(), i.class_id, &i.mask});
    }
    for (const auto& m : f.ignore_regions) {
      lines.push_back({f.frame, kIgnoreObjectId, lines.size(), kClassIgnore, &m});
    }
  }
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    if (a.obj_id != b.obj_id) return a.obj_id < b.obj_id;
    return a.order < b.order;
  });
  std::string out;
  for (const auto& l : lines) {
    out += std::to_string(l.frame) + ' ' + std::to_string(l.obj_id) + ' ' + std::to_string(l.class_id) +
           ' ' + std::to_string(l.mask->height) + ' ' + std::to_string(l.mask->width) + ' ' +
           l.mask->counts + '\n';
  }
  return out;
}

void write_kitti(std::span<const FrameAnnotations> frames, const std::filesystem::path& path) {
  write_file_atomic(path, format_kitti(frames));
}

}  // namespace wsmots
