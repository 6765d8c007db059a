#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace wsmots {

/// Whole file as bytes. Throws FormatError when it cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace wsmots
