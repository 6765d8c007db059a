#include "wsmots/detections.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "wsmots/error.hpp"
#include "wsmots/fsutil.hpp"

namespace wsmots {

namespace {

using json = nlohmann::ordered_json;

const json& field(const json& j, const char* name, std::size_t line) {
  const auto it = j.find(name);
  if (it == j.end()) throw FormatError(std::string("missing field '") + name + "'", line);
  return *it;
}

int as_int(const json& j, const char* name, std::size_t line) {
  if (!j.is_number_integer()) throw FormatError(std::string("'") + name + "' must be an integer", line);
  const auto v = j.get<std::int64_t>();
  if (v < 0 || v > std::numeric_limits<int>::max()) {
    throw FormatError(std::string("'") + name + "' out of range", line);
  }
  return static_cast<int>(v);
}

double as_number(const json& j, const char* name, std::size_t line) {
  if (!j.is_number()) throw FormatError(std::string("'") + name + "' must be a number", line);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw FormatError(std::string("'") + name + "' must be finite", line);
  return v;
}

TrackObservation parse_record(const json& j, std::size_t line) {
  if (!j.is_object()) throw FormatError("record must be a JSON object", line);
  TrackObservation o;
  o.frame = as_int(field(j, "frame", line), "frame", line);
  o.class_id = as_int(field(j, "class_id", line), "class_id", line);
  o.score = as_number(field(j, "score", line), "score", line);
  if (o.score < 0.0 || o.score > 1.0) throw FormatError("'score' must lie in [0,1]", line);

  const json& box = field(j, "bbox", line);
  if (!box.is_array() || box.size() != 4) throw FormatError("'bbox' must hold 4 numbers", line);
  double b[4];
  for (std::size_t i = 0; i < 4; ++i) b[i] = as_number(box[i], "bbox", line);
  try {
    o.bbox = BBox(b[0], b[1], b[2], b[3]);
  } catch (const Error& e) {
    throw FormatError(e.what(), line);
  }

  const json& emb = field(j, "embedding", line);
  if (!emb.is_array() || emb.empty()) throw FormatError("'embedding' must be a non-empty array", line);
  for (const auto& v : emb) o.embedding.push_back(as_number(v, "embedding", line));

  if (const auto it = j.find("track_id"); it != j.end() && !it->is_null()) {
    o.identity = as_int(*it, "track_id", line);
  }
  if (const auto it = j.find("mask"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw FormatError("'mask' must be an object", line);
    const json& counts = field(*it, "counts", line);
    if (!counts.is_string()) throw FormatError("'counts' must be a string", line);
    RleMask m{as_int(field(*it, "h", line), "h", line), as_int(field(*it, "w", line), "w", line),
              counts.get<std::string>()};
    std::uint64_t covered = 0;
    try {
      for (auto r : decompress_counts(m.counts)) covered += r;
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line);
    }
    if (covered != static_cast<std::uint64_t>(m.height) * static_cast<std::uint64_t>(m.width)) {
      throw FormatError("mask RLE does not cover h x w", line);
    }
    o.mask = std::move(m);
  }
  return o;
}

}  // namespace

std::vector<TrackObservation> parse_detections(std::string_view text) {
  std::vector<TrackObservation> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    TrackObservation o = parse_record(j, line_no);
    if (!out.empty() && o.embedding.size() != out.front().embedding.size()) {
      throw FormatError("embedding has " + std::to_string(o.embedding.size()) + " values, earlier lines have " +
                        std::to_string(out.front().embedding.size()), line_no);
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<TrackObservation> read_detections(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_detections(text);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_detection(const TrackObservation& o) {
  json j;
  j["frame"] = o.frame;
  if (o.identity) j["track_id"] = *o.identity;
  j["class_id"] = o.class_id;
  j["score"] = o.score;
  j["bbox"] = {o.bbox.x0, o.bbox.y0, o.bbox.x1, o.bbox.y1};
  j["embedding"] = o.embedding;
  if (o.mask) j["mask"] = {{"h", o.mask->height}, {"w", o.mask->width}, {"counts", o.mask->counts}};
  return j.dump();
}

void write_detections(std::span<const TrackObservation> detections, std::ostream& out) {
  for (const auto& d : detections) out << format_detection(d) << '\n';
}

void write_detections(std::span<const TrackObservation> detections, const std::filesystem::path& path) {
  std::ostringstream out;
  write_detections(detections, out);
  write_file_atomic(path, out.str());
}

}  // namespace wsmots
