#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsmots/tracking.hpp"

namespace wsmots {

/// JSON Lines, one detection per line:
///   {"frame":0,"track_id":3,"class_id":1,"score":0.97,"bbox":[x0,y0,x1,y1],
///    "embedding":[...],"mask":{"h":375,"w":1242,"counts":"..."}}
/// track_id and mask are optional. All embeddings of a file share one length.
/// Errors are FormatError with the 1-based line number.
std::vector<TrackObservation> parse_detections(std::string_view text);
std::vector<TrackObservation> read_detections(const std::filesystem::path& path);

std::string format_detection(const TrackObservation& obs);
void write_detections(std::span<const TrackObservation> detections, std::ostream& out);
void write_detections(std::span<const TrackObservation> detections, const std::filesystem::path& path);

}  // namespace wsmots
